//! Candidate scoring and one-vs-all target resolution.
//!
//! Every legal candidate is scored independently by the SVM of its action
//! kind; the candidate with the highest calibrated probability wins.

mod features;
mod train;

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::attention::{AttentionConfig, AttentionError, GazeTrace};
use crate::svm::{SvmError, SvmModel};
use crate::world::{BoardLayout, BoardState, ObjectId, WorldError};

pub use crate::world::ActionKind;
pub use features::{pick_features, place_features, AttentionFrames, FeatureVector, PickFeatureSet};
pub use train::{build_dataset, train_kind, train_predictors, KindReport, TrainOptions, TrainReport};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum IntentError {
    #[error("no legal candidates")]
    NoCandidates,
    #[error("stock slot {0} does not exist")]
    EmptySlot(usize),
    #[error("{0} is not a legal candidate")]
    IllegalCandidate(ObjectId),
    #[error("trace does not cover the anticipation window")]
    InsufficientTrace,
    #[error("model expects {expected} features, this predictor builds {got}")]
    ModelShape { expected: usize, got: usize },
    #[error("model i/o: {0}")]
    ModelLoad(String),
    #[error(transparent)]
    Attention(#[from] AttentionError),
    #[error(transparent)]
    Svm(#[from] SvmError),
    #[error(transparent)]
    World(#[from] WorldError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PredictorConfig {
    pub attention: AttentionConfig,
    /// A prediction is `decided` once its top probability reaches this value.
    pub threshold: f64,
}

impl Default for PredictorConfig {
    fn default() -> Self {
        PredictorConfig { attention: AttentionConfig::default(), threshold: 0.55 }
    }
}

/// The pick and place classifiers.
#[derive(Debug, Clone, PartialEq)]
pub struct IntentModels {
    pub pick: SvmModel,
    pub place: SvmModel,
}

pub const PICK_MODEL_FILE: &str = "pick.json";
pub const PLACE_MODEL_FILE: &str = "place.json";

impl IntentModels {
    pub fn model(&self, kind: ActionKind) -> &SvmModel {
        match kind {
            ActionKind::Pick => &self.pick,
            ActionKind::Place => &self.place,
        }
    }

    /// Pick features are inferred from the pick model's input size.
    pub fn pick_feature_set(&self, cfg: &AttentionConfig) -> Result<PickFeatureSet, IntentError> {
        let n = cfg.samples_per_window;
        match self.pick.dim {
            d if d == 2 * n => Ok(PickFeatureSet::Full),
            d if d == n => Ok(PickFeatureSet::F1Only),
            d => Err(IntentError::ModelShape { expected: d, got: 2 * n }),
        }
    }

    pub fn check(&self, cfg: &AttentionConfig) -> Result<(), IntentError> {
        self.pick_feature_set(cfg)?;
        if self.place.dim != cfg.samples_per_window {
            return Err(IntentError::ModelShape { expected: self.place.dim, got: cfg.samples_per_window });
        }
        for m in [&self.pick, &self.place] {
            if m.platt.is_none() {
                return Err(SvmError::Uncalibrated.into());
            }
        }
        Ok(())
    }

    /// SHA-256 over both serialized models; pins logs to the exact weights.
    pub fn hash(&self) -> String {
        let mut h = Sha256::new();
        h.update(self.pick.to_json().as_bytes());
        h.update(b"\n");
        h.update(self.place.to_json().as_bytes());
        hex::encode(h.finalize())
    }

    pub fn save(&self, dir: &Path) -> std::io::Result<()> {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join(PICK_MODEL_FILE), self.pick.to_json())?;
        std::fs::write(dir.join(PLACE_MODEL_FILE), self.place.to_json())
    }

    pub fn load(dir: &Path) -> Result<Self, IntentError> {
        let read = |name: &str| -> Result<SvmModel, IntentError> {
            let p = dir.join(name);
            let s = std::fs::read_to_string(&p).map_err(|e| IntentError::ModelLoad(format!("{}: {e}", p.display())))?;
            SvmModel::from_json(&s).map_err(|e| IntentError::ModelLoad(format!("{}: {e}", p.display())))
        };
        Ok(IntentModels { pick: read(PICK_MODEL_FILE)?, place: read(PLACE_MODEL_FILE)? })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub t: f64,
    pub kind: ActionKind,
    #[serde(rename = "probs")]
    pub per_candidate: BTreeMap<ObjectId, f64>,
    pub chosen: ObjectId,
    pub decided: bool,
}

impl Prediction {
    pub fn max_probability(&self) -> f64 {
        self.per_candidate[&self.chosen]
    }

    /// Lowest-probability candidate, lowest id on ties.
    pub fn least_likely(&self) -> ObjectId {
        let mut it = self.per_candidate.iter();
        let (mut best, mut bp) = it.next().map(|(k, v)| (*k, *v)).expect("non-empty");
        for (&k, &v) in it {
            if v < bp {
                best = k;
                bp = v;
            }
        }
        best
    }
}

/// Highest-probability candidate; the map's id order breaks ties toward the lowest id.
pub fn resolve(per_candidate: &BTreeMap<ObjectId, f64>) -> Option<ObjectId> {
    let mut best: Option<(ObjectId, f64)> = None;
    for (&k, &v) in per_candidate {
        if best.is_none_or(|(_, bv)| v > bv) {
            best = Some((k, v));
        }
    }
    best.map(|b| b.0)
}

pub fn legal_candidates(board: &BoardState, kind: ActionKind) -> Result<Vec<ObjectId>, IntentError> {
    Ok(match kind {
        ActionKind::Pick => board.legal_pick_candidates()?.into_iter().map(ObjectId::Slot).collect(),
        ActionKind::Place => board.legal_place_candidates()?.into_iter().map(ObjectId::Cell).collect(),
    })
}

/// Calibrated P(chosen = 1) of every candidate for the window ending at frame `end`.
pub fn score_candidates(
    model: &SvmModel,
    set: PickFeatureSet,
    frames: &AttentionFrames,
    board: &BoardState,
    kind: ActionKind,
    candidates: &[ObjectId],
    end: i64,
    buf: &mut Vec<f64>,
) -> Result<BTreeMap<ObjectId, f64>, IntentError> {
    if candidates.is_empty() {
        return Err(IntentError::NoCandidates);
    }
    let mut per_candidate = BTreeMap::new();
    for &c in candidates {
        frames.features_into(board, kind, c, end, set, buf)?;
        per_candidate.insert(c, model.predict_proba(buf)?);
    }
    Ok(per_candidate)
}

/// Scores `candidates` on the window ending at frame `end` of `frames`.
pub fn predict_frames(
    models: &IntentModels,
    frames: &AttentionFrames,
    board: &BoardState,
    kind: ActionKind,
    candidates: &[ObjectId],
    end: i64,
    cfg: &PredictorConfig,
    buf: &mut Vec<f64>,
) -> Result<Prediction, IntentError> {
    let set = models.pick_feature_set(&cfg.attention)?;
    let per_candidate = score_candidates(models.model(kind), set, frames, board, kind, candidates, end, buf)?;
    let chosen = resolve(&per_candidate).expect("non-empty");
    let decided = per_candidate[&chosen] >= cfg.threshold;
    Ok(Prediction { t: cfg.attention.frame_time(end), kind, per_candidate, chosen, decided })
}

pub fn predict(
    models: &IntentModels,
    trace: &GazeTrace,
    board: &BoardState,
    layout: &BoardLayout,
    kind: ActionKind,
    window_end: f64,
    cfg: &PredictorConfig,
) -> Result<Prediction, IntentError> {
    let candidates = legal_candidates(board, kind)?;
    if candidates.is_empty() {
        return Err(IntentError::NoCandidates);
    }
    let frames = AttentionFrames::for_window(trace, layout, window_end, &cfg.attention)?;
    let mut buf = Vec::with_capacity(2 * cfg.attention.samples_per_window);
    let mut p = predict_frames(models, &frames, board, kind, &candidates, frames.last_frame(), cfg, &mut buf)?;
    p.t = window_end;
    Ok(p)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn probs(v: &[(ObjectId, f64)]) -> BTreeMap<ObjectId, f64> {
        v.iter().copied().collect()
    }

    #[test]
    fn argmax_and_ties() {
        let (a, b, c) = (ObjectId::Slot(0), ObjectId::Slot(1), ObjectId::Slot(2));
        assert_eq!(resolve(&probs(&[(a, 0.2), (b, 0.7), (c, 0.1)])), Some(b));
        assert_eq!(resolve(&probs(&[(b, 0.5), (a, 0.5)])), Some(a));
        assert_eq!(resolve(&probs(&[(ObjectId::Cell(0), 0.5), (ObjectId::Slot(3), 0.5)])), Some(ObjectId::Slot(3)));
        assert_eq!(resolve(&BTreeMap::new()), None);
    }

    #[test]
    fn prediction_record_shape() {
        let p = Prediction {
            t: 1.5,
            kind: ActionKind::Place,
            per_candidate: probs(&[(ObjectId::Cell(3), 0.25), (ObjectId::Cell(9), 0.75)]),
            chosen: ObjectId::Cell(9),
            decided: true,
        };
        let v: serde_json::Value = serde_json::to_value(&p).unwrap();
        assert_eq!(v["probs"]["cell:9"], 0.75);
        assert_eq!(v["kind"], "place");
        assert_eq!(v["chosen"], "cell:9");
        assert_eq!(p.least_likely(), ObjectId::Cell(3));
        let back: Prediction = serde_json::from_value(v).unwrap();
        assert_eq!(back, p);
    }
}
