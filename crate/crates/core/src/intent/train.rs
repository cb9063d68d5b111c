use serde::{Deserialize, Serialize};

use super::{AttentionFrames, IntentError, IntentModels, PickFeatureSet};
use crate::attention::AttentionConfig;
use crate::exec::Execution;
use crate::svm::{cross_validate, grid_search, train_calibrated, CvReport, SvmModel, SvmParams, TrainingExample};
use crate::synth::Episode;
use crate::world::{ActionKind, BoardLayout};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainOptions {
    pub params: SvmParams,
    /// Pick (γ, C) by cross-validated grid search instead of using `params` as is.
    pub grid: bool,
    pub folds: usize,
    /// Also report k-fold per-object accuracy.
    pub cross_validate: bool,
    pub pick_features: PickFeatureSet,
}

impl Default for TrainOptions {
    fn default() -> Self {
        TrainOptions { params: SvmParams::default(), grid: false, folds: 5, cross_validate: true, pick_features: PickFeatureSet::Full }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KindReport {
    pub examples: usize,
    pub positives: usize,
    pub params: SvmParams,
    pub support_vectors: usize,
    pub cv: Option<CvReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub pick: KindReport,
    pub place: KindReport,
}

/// One example per candidate of every `kind` episode, at the moment of the
/// action: the true target is labelled chosen, every other candidate not.
pub fn build_dataset(
    episodes: &[Episode],
    layout: &BoardLayout,
    kind: ActionKind,
    set: PickFeatureSet,
    cfg: &AttentionConfig,
    exec: Execution,
) -> Result<Vec<TrainingExample>, IntentError> {
    let eps: Vec<&Episode> = episodes.iter().filter(|e| e.kind == kind).collect();
    let per_episode = exec.map(&eps, |ep| -> Result<Vec<TrainingExample>, IntentError> {
        let frames = AttentionFrames::for_window(&ep.trace, layout, ep.action_time, cfg)?;
        let end = frames.last_frame();
        let mut out = Vec::with_capacity(ep.candidates.len());
        for &c in &ep.candidates {
            let mut x = Vec::new();
            frames.features_into(&ep.board, kind, c, end, set, &mut x)?;
            out.push(TrainingExample::new(x, c == ep.true_target));
        }
        Ok(out)
    });
    let mut data = Vec::new();
    for r in per_episode {
        data.extend(r?);
    }
    Ok(data)
}

/// Trains and calibrates one classifier, optionally after a grid search.
pub fn train_kind(data: &[TrainingExample], opts: &TrainOptions, seed: u64, exec: Execution) -> Result<(SvmModel, KindReport), IntentError> {
    let params = if opts.grid { grid_search(data, &opts.params, opts.folds, seed, exec)?.best } else { opts.params };
    let cv = if opts.cross_validate { Some(cross_validate(data, opts.folds, &params, seed, exec)?) } else { None };
    let model = train_calibrated(data, &params, seed, exec)?;
    let report =
        KindReport { examples: data.len(), positives: data.iter().filter(|e| e.positive()).count(), params, support_vectors: model.n_support(), cv };
    Ok((model, report))
}

pub fn train_predictors(
    episodes: &[Episode],
    layout: &BoardLayout,
    opts: &TrainOptions,
    cfg: &AttentionConfig,
    seed: u64,
    exec: Execution,
) -> Result<(IntentModels, TrainReport), IntentError> {
    let pick_data = build_dataset(episodes, layout, ActionKind::Pick, opts.pick_features, cfg, exec)?;
    let place_data = build_dataset(episodes, layout, ActionKind::Place, opts.pick_features, cfg, exec)?;
    let (pick, pick_rep) = train_kind(&pick_data, opts, seed, exec)?;
    let (place, place_rep) = train_kind(&place_data, opts, seed.wrapping_add(1), exec)?;
    Ok((IntentModels { pick, place }, TrainReport { pick: pick_rep, place: place_rep }))
}
