//! Anticipation-time analysis: accuracy as the prediction window is moved
//! away from the moment of the action, baseline comparison and duration
//! statistics.

mod plot;
mod stats;

use std::io::{Read, Write};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::attention::AttentionConfig;
use crate::exec::Execution;
use crate::intent::{build_dataset, resolve, score_candidates, train_kind, AttentionFrames, IntentError, PickFeatureSet, TrainOptions};
use crate::svm::SvmModel;
use crate::synth::{Corpus, Episode};
use crate::world::{ActionKind, BoardLayout};

pub use plot::{render_svg, PlotSeries};
pub use stats::{sign_test, spearman, welch_t_test, GroupStats, WelchTest};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("curves are on different grids")]
    GridMismatch,
    #[error("degenerate data: {0}")]
    DegenerateData(String),
    #[error(transparent)]
    Intent(#[from] IntentError),
    #[error("curve csv: {0}")]
    Csv(#[from] csv::Error),
}

/// Low-chance episodes: picks with all four slots available, places with four to six cells.
pub fn is_low_chance(ep: &Episode) -> bool {
    match ep.kind {
        ActionKind::Pick => ep.candidates.len() == 4,
        ActionKind::Place => (4..=6).contains(&ep.candidates.len()),
    }
}

pub fn low_chance_subset(corpus: &Corpus, kind: ActionKind) -> Corpus {
    corpus.filtered(|e| e.kind == kind && is_low_chance(e))
}

/// Accuracy of guessing uniformly among `candidates`.
pub fn chance_level(candidates: usize) -> f64 {
    1.0 / candidates.max(1) as f64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccuracyCurve {
    pub kind: ActionKind,
    pub t_prior: Vec<f64>,
    pub accuracy: Vec<f64>,
    pub n_samples: Vec<usize>,
    /// Episodes whose trace did not cover the window at this offset.
    pub skipped: Vec<usize>,
}

impl AccuracyCurve {
    pub fn len(&self) -> usize {
        self.t_prior.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t_prior.is_empty()
    }

    fn from_counts(kind: ActionKind, frame: f64, hits: &[usize], n: &[usize], skipped: Vec<usize>) -> Self {
        AccuracyCurve {
            kind,
            t_prior: (0..hits.len()).map(|j| j as f64 * frame).collect(),
            accuracy: hits.iter().zip(n).map(|(&h, &n)| if n == 0 { 0.0 } else { h as f64 / n as f64 }).collect(),
            n_samples: n.to_vec(),
            skipped,
        }
    }

    /// Accuracy at the grid point nearest to `t`.
    pub fn at(&self, t: f64) -> Option<f64> {
        let step = self.t_prior.get(1)? - self.t_prior[0];
        let j = (t / step).round() as usize;
        self.accuracy.get(j).copied()
    }

    /// Indices of grid points with `t0 ≤ t_prior ≤ t1` (within half a step).
    pub fn indices_between(&self, t0: f64, t1: f64) -> Vec<usize> {
        let half = self.t_prior.get(1).map_or(0.0, |s| (s - self.t_prior[0]) / 2.0);
        (0..self.len()).filter(|&j| self.t_prior[j] >= t0 - half && self.t_prior[j] <= t1 + half).collect()
    }

    /// Spearman correlation of accuracy against −t_prior over `[t0, t1]`.
    pub fn trend(&self, t0: f64, t1: f64) -> f64 {
        let idx = self.indices_between(t0, t1);
        let a: Vec<f64> = idx.iter().map(|&j| self.accuracy[j]).collect();
        let t: Vec<f64> = idx.iter().map(|&j| -self.t_prior[j]).collect();
        spearman(&t, &a)
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<(), EvalError> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["t_prior_s", "accuracy", "n"])?;
        for j in 0..self.len() {
            wr.write_record([self.t_prior[j].to_string(), self.accuracy[j].to_string(), self.n_samples[j].to_string()])?;
        }
        wr.flush().map_err(csv::Error::from)?;
        Ok(())
    }

    pub fn read_csv<R: Read>(kind: ActionKind, r: R) -> Result<Self, EvalError> {
        #[derive(Deserialize)]
        struct Row {
            t_prior_s: f64,
            accuracy: f64,
            n: usize,
        }
        let mut c = AccuracyCurve { kind, t_prior: vec![], accuracy: vec![], n_samples: vec![], skipped: vec![] };
        for row in csv::Reader::from_reader(r).deserialize() {
            let row: Row = row?;
            c.t_prior.push(row.t_prior_s);
            c.accuracy.push(row.accuracy);
            c.n_samples.push(row.n);
            c.skipped.push(0);
        }
        Ok(c)
    }
}

/// Number of sweep offsets in `[0, t_max]` at one-frame spacing.
pub fn sweep_steps(t_max: f64, frame: f64) -> usize {
    (t_max / frame + 1e-9).floor() as usize + 1
}

/// Per-offset outcome of one episode: `Some(hit)` or `None` when skipped.
pub fn episode_sweep(
    model: &SvmModel,
    set: PickFeatureSet,
    ep: &Episode,
    layout: &BoardLayout,
    steps: usize,
    cfg: &AttentionConfig,
) -> Result<Vec<Option<bool>>, IntentError> {
    let n = cfg.samples_per_window as i64;
    let ends: Vec<i64> = (0..steps).map(|j| cfg.frame_index(ep.action_time - j as f64 * cfg.frame)).collect();
    let earliest = ep.trace.earliest_t().ok_or(IntentError::InsufficientTrace)?;
    let (lo, hi) = (*ends.iter().min().unwrap(), *ends.iter().max().unwrap());
    let frames = AttentionFrames::build(&ep.trace, layout, lo - n + 1, hi, cfg);
    let mut buf = Vec::with_capacity(2 * cfg.samples_per_window);
    let mut out = Vec::with_capacity(steps);
    for &end in &ends {
        if cfg.frame_time(end - n + 1) < earliest - 0.5 * cfg.frame {
            out.push(None);
            continue;
        }
        let probs = score_candidates(model, set, &frames, &ep.board, ep.kind, &ep.candidates, end, &mut buf)?;
        out.push(Some(resolve(&probs) == Some(ep.true_target)));
    }
    Ok(out)
}

fn pick_set_for(model: &SvmModel, kind: ActionKind, cfg: &AttentionConfig) -> PickFeatureSet {
    if kind == ActionKind::Pick && model.dim == cfg.samples_per_window {
        PickFeatureSet::F1Only
    } else {
        PickFeatureSet::Full
    }
}

struct Counts {
    hits: Vec<usize>,
    n: Vec<usize>,
    skipped: Vec<usize>,
}

impl Counts {
    fn new(steps: usize) -> Self {
        Counts { hits: vec![0; steps], n: vec![0; steps], skipped: vec![0; steps] }
    }

    fn into_curve(self, kind: ActionKind, frame: f64) -> AccuracyCurve {
        AccuracyCurve::from_counts(kind, frame, &self.hits, &self.n, self.skipped)
    }
}

fn sweep_into(
    counts: &mut Counts,
    model: &SvmModel,
    episodes: &[Episode],
    layout: &BoardLayout,
    kind: ActionKind,
    cfg: &AttentionConfig,
    exec: Execution,
) -> Result<(), EvalError> {
    let steps = counts.n.len();
    let set = pick_set_for(model, kind, cfg);
    let eps: Vec<&Episode> = episodes.iter().filter(|e| e.kind == kind).collect();
    let outcomes = exec.map(&eps, |ep| episode_sweep(model, set, ep, layout, steps, cfg));
    for o in outcomes {
        for (j, r) in o?.into_iter().enumerate() {
            match r {
                Some(h) => {
                    counts.n[j] += 1;
                    counts.hits[j] += h as usize;
                }
                None => counts.skipped[j] += 1,
            }
        }
    }
    Ok(())
}

/// One-vs-all accuracy of `model` over `episodes` of `kind` for every
/// t_prior on the frame grid in `[0, t_max]`.
pub fn sweep_accuracy(
    model: &SvmModel,
    episodes: &[Episode],
    layout: &BoardLayout,
    kind: ActionKind,
    t_max: f64,
    cfg: &AttentionConfig,
    exec: Execution,
) -> Result<AccuracyCurve, EvalError> {
    let mut counts = Counts::new(sweep_steps(t_max, cfg.frame));
    sweep_into(&mut counts, model, episodes, layout, kind, cfg, exec)?;
    Ok(counts.into_curve(kind, cfg.frame))
}

/// Out-of-sample sweep: episodes are split into `k` folds, each fold is swept
/// with a model trained on the remaining folds, and the counts are pooled.
/// Only low-chance episodes are evaluated; training uses every episode.
pub fn cv_sweep(
    episodes: &[Episode],
    layout: &BoardLayout,
    kind: ActionKind,
    t_max: f64,
    opts: &TrainOptions,
    cfg: &AttentionConfig,
    k: usize,
    seed: u64,
    exec: Execution,
) -> Result<AccuracyCurve, EvalError> {
    let idx: Vec<usize> = (0..episodes.len()).filter(|&i| episodes[i].kind == kind).collect();
    if idx.len() < k || k < 2 {
        return Err(EvalError::DegenerateData(format!("{} episodes cannot fill {k} folds", idx.len())));
    }
    let mut shuffled = idx;
    shuffled.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut counts = Counts::new(sweep_steps(t_max, cfg.frame));
    let opts = TrainOptions { cross_validate: false, ..*opts };
    for f in 0..k {
        let in_fold = |p: &usize| p % k == f;
        let train: Vec<Episode> = shuffled.iter().enumerate().filter(|(p, _)| !in_fold(p)).map(|(_, &i)| episodes[i].clone()).collect();
        let test: Vec<Episode> =
            shuffled.iter().enumerate().filter(|(p, _)| in_fold(p)).map(|(_, &i)| episodes[i].clone()).filter(is_low_chance).collect();
        let data = build_dataset(&train, layout, kind, opts.pick_features, cfg, exec)?;
        let (model, _) = train_kind(&data, &opts, seed.wrapping_add(f as u64), exec)?;
        sweep_into(&mut counts, &model, &test, layout, kind, cfg, exec)?;
    }
    Ok(counts.into_curve(kind, cfg.frame))
}

/// Pick classifier on the object's own attention profile only.
pub fn train_f1_baseline(
    episodes: &[Episode],
    layout: &BoardLayout,
    opts: &TrainOptions,
    cfg: &AttentionConfig,
    seed: u64,
    exec: Execution,
) -> Result<SvmModel, EvalError> {
    let opts = TrainOptions { pick_features: PickFeatureSet::F1Only, cross_validate: false, ..*opts };
    let data = build_dataset(episodes, layout, ActionKind::Pick, opts.pick_features, cfg, exec)?;
    Ok(train_kind(&data, &opts, seed, exec)?.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub t_prior: Vec<f64>,
    /// `a − b` at every grid point.
    pub difference: Vec<f64>,
    pub mean_difference: f64,
    pub a_better: usize,
    pub b_better: usize,
    pub ties: usize,
    /// Two-sided sign test over grid points, ties dropped.
    pub sign_test_p: f64,
}

pub fn compare_curves(a: &AccuracyCurve, b: &AccuracyCurve) -> Result<ComparisonReport, EvalError> {
    if a.len() != b.len() || a.t_prior.iter().zip(&b.t_prior).any(|(x, y)| (x - y).abs() > 1e-9) {
        return Err(EvalError::GridMismatch);
    }
    let difference: Vec<f64> = a.accuracy.iter().zip(&b.accuracy).map(|(x, y)| x - y).collect();
    let mean_difference = if difference.is_empty() { 0.0 } else { difference.iter().sum::<f64>() / difference.len() as f64 };
    let a_better = difference.iter().filter(|&&d| d > 0.0).count();
    let b_better = difference.iter().filter(|&&d| d < 0.0).count();
    let ties = difference.len() - a_better - b_better;
    Ok(ComparisonReport {
        t_prior: a.t_prior.clone(),
        difference,
        mean_difference,
        a_better,
        b_better,
        ties,
        sign_test_p: sign_test(a_better, b_better),
    })
}

impl ComparisonReport {
    /// Restricts the report to `t0 ≤ t_prior ≤ t1`.
    pub fn window(&self, t0: f64, t1: f64) -> ComparisonReport {
        let keep: Vec<usize> = (0..self.t_prior.len()).filter(|&j| self.t_prior[j] >= t0 - 1e-9 && self.t_prior[j] <= t1 + 1e-9).collect();
        let difference: Vec<f64> = keep.iter().map(|&j| self.difference[j]).collect();
        let a_better = difference.iter().filter(|&&d| d > 0.0).count();
        let b_better = difference.iter().filter(|&&d| d < 0.0).count();
        ComparisonReport {
            t_prior: keep.iter().map(|&j| self.t_prior[j]).collect(),
            mean_difference: difference.iter().sum::<f64>() / difference.len().max(1) as f64,
            ties: difference.len() - a_better - b_better,
            difference,
            a_better,
            b_better,
            sign_test_p: sign_test(a_better, b_better),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DurationStats {
    pub pick: GroupStats,
    pub place: GroupStats,
    pub t_statistic: f64,
    pub df: f64,
    pub p_value: f64,
}

/// Pick vs place decision durations with a Welch t-test (pick − place).
pub fn duration_stats(episodes: &[Episode]) -> Result<DurationStats, EvalError> {
    let pick: Vec<f64> = episodes.iter().filter(|e| e.kind == ActionKind::Pick).map(Episode::duration).collect();
    let place: Vec<f64> = episodes.iter().filter(|e| e.kind == ActionKind::Place).map(Episode::duration).collect();
    duration_stats_from(&pick, &place)
}

pub fn duration_stats_from(pick: &[f64], place: &[f64]) -> Result<DurationStats, EvalError> {
    let w = welch_t_test(pick, place).ok_or_else(|| EvalError::DegenerateData("duration test needs at least two episodes of each kind".into()))?;
    Ok(DurationStats { pick: GroupStats::of(pick), place: GroupStats::of(place), t_statistic: w.t, df: w.df, p_value: w.p_value })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn curve(acc: Vec<f64>) -> AccuracyCurve {
        let n = acc.len();
        AccuracyCurve {
            kind: ActionKind::Pick,
            t_prior: (0..n).map(|j| j as f64 / 75.0).collect(),
            accuracy: acc,
            n_samples: vec![100; n],
            skipped: vec![0; n],
        }
    }

    #[test]
    fn compare_with_self_and_shift() {
        let a = curve((0..64).map(|j| 0.9 - j as f64 * 0.005).collect());
        let r = compare_curves(&a, &a).unwrap();
        assert_eq!(r.mean_difference, 0.0);
        assert_eq!(r.sign_test_p, 1.0);
        let b = curve(a.accuracy.iter().map(|x| x + 0.1).collect());
        let r = compare_curves(&b, &a).unwrap();
        assert!((r.mean_difference - 0.1).abs() < 1e-12);
        assert!(r.sign_test_p < 0.01);
        let back = compare_curves(&a, &b).unwrap();
        assert!((back.mean_difference + r.mean_difference).abs() < 1e-12);
        let short = curve(vec![0.5; 10]);
        assert!(matches!(compare_curves(&a, &short), Err(EvalError::GridMismatch)));
    }

    #[test]
    fn chance_for_four() {
        assert_eq!(chance_level(4), 0.25);
    }

    #[test]
    fn csv_roundtrip() {
        let a = curve(vec![0.9, 0.8, 0.75]);
        let mut buf = Vec::new();
        a.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("t_prior_s,accuracy,n\n"));
        let back = AccuracyCurve::read_csv(ActionKind::Pick, &buf[..]).unwrap();
        assert_eq!(back.accuracy, a.accuracy);
        assert_eq!(back.t_prior, a.t_prior);
    }

    #[test]
    fn steps_cover_endpoints() {
        let f = 1.0 / 75.0;
        assert_eq!(sweep_steps(0.0, f), 1);
        assert_eq!(sweep_steps(4.0, f), 301);
        assert_eq!(sweep_steps(3.0, f), 226);
    }

    #[test]
    fn trend_of_decreasing_curve() {
        let c = curve((0..50).map(|j| 1.0 - j as f64 * 0.01).collect());
        assert!((c.trend(0.0, 1.0) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn durations() {
        let s = duration_stats_from(&[3.0, 3.0, 3.0], &[5.0, 5.0, 5.0]).unwrap();
        assert!(s.t_statistic < 0.0);
        assert_eq!(s.pick.n, 3);
        assert!(duration_stats_from(&[1.0], &[2.0, 3.0]).is_err());
    }
}
