use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::smo::train_smo_detailed;
use super::{check_data, SvmError, SvmModel, SvmParams, TrainingExample};
use crate::exec::Execution;

/// Share of the training folds held out for probability calibration.
const CALIBRATION_SHARE: f64 = 0.2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvReport {
    pub k: usize,
    pub fold_sizes: Vec<usize>,
    pub per_fold_accuracy: Vec<f64>,
    pub mean_accuracy: f64,
}

/// Fold index for every example. Each class is shuffled separately and dealt
/// round-robin, continuing the deal across classes, so fold sizes differ by at
/// most one and class proportions are preserved.
pub fn stratified_folds(labels: &[bool], k: usize, seed: u64) -> Vec<usize> {
    assert!(k > 0);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut fold = vec![0; labels.len()];
    let mut next = 0;
    for class in [true, false] {
        let mut idx: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
        idx.shuffle(&mut rng);
        for i in idx {
            fold[i] = next % k;
            next += 1;
        }
    }
    fold
}

/// Stratified split into (train, holdout) index lists with `share` of each
/// class in the holdout (at least one per class when the class has ≥ 2 members).
pub fn stratified_split(labels: &[bool], share: f64, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut train, mut hold) = (Vec::new(), Vec::new());
    for class in [true, false] {
        let mut idx: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
        idx.shuffle(&mut rng);
        let mut h = (idx.len() as f64 * share).round() as usize;
        if idx.len() >= 2 {
            h = h.clamp(1, idx.len() - 1);
        } else {
            h = 0;
        }
        hold.extend_from_slice(&idx[..h]);
        train.extend_from_slice(&idx[h..]);
    }
    train.sort_unstable();
    hold.sort_unstable();
    (train, hold)
}

/// Trains on a stratified 80 % and calibrates on the remaining 20 %.
pub fn train_calibrated(data: &[TrainingExample], params: &SvmParams, seed: u64, exec: Execution) -> Result<SvmModel, SvmError> {
    let labels: Vec<bool> = data.iter().map(|e| e.positive()).collect();
    let (tr, ho) = stratified_split(&labels, CALIBRATION_SHARE, seed ^ 0x5eed_ca1b);
    let train: Vec<TrainingExample> = tr.iter().map(|&i| data[i].clone()).collect();
    let hold: Vec<TrainingExample> = ho.iter().map(|&i| data[i].clone()).collect();
    let (mut model, _) = train_smo_detailed(&train, params, seed, exec)?;
    model.fit_platt(&hold)?;
    Ok(model)
}

pub fn cross_validate(data: &[TrainingExample], k: usize, params: &SvmParams, seed: u64, exec: Execution) -> Result<CvReport, SvmError> {
    check_data(data)?;
    if k < 2 || data.len() < k {
        return Err(SvmError::DegenerateData(format!("{} examples cannot fill {k} folds", data.len())));
    }
    let labels: Vec<bool> = data.iter().map(|e| e.positive()).collect();
    let fold = stratified_folds(&labels, k, seed);
    let run = |f: &usize| -> Result<f64, SvmError> {
        let f = *f;
        let train: Vec<TrainingExample> = (0..data.len()).filter(|&i| fold[i] != f).map(|i| data[i].clone()).collect();
        // kernel rows are already parallel inside; folds run sequentially then
        let model = train_calibrated(&train, params, seed.wrapping_add(f as u64), Execution::Sequential)?;
        let test: Vec<&TrainingExample> = (0..data.len()).filter(|&i| fold[i] == f).map(|i| &data[i]).collect();
        let correct = test.iter().filter(|e| model.predict_label(&e.features).unwrap() == e.positive()).count();
        Ok(correct as f64 / test.len() as f64)
    };
    let folds: Vec<usize> = (0..k).collect();
    let per_fold_accuracy = exec.map(&folds, run).into_iter().collect::<Result<Vec<_>, _>>()?;
    let fold_sizes = (0..k).map(|f| fold.iter().filter(|&&x| x == f).count()).collect();
    let mean_accuracy = per_fold_accuracy.iter().sum::<f64>() / k as f64;
    Ok(CvReport { k, fold_sizes, per_fold_accuracy, mean_accuracy })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridResult {
    pub best: SvmParams,
    pub scores: Vec<(SvmParams, f64)>,
}

/// Cross-validated search over γ ∈ {0.1, 1, 10}/dim and C ∈ {0.1, 1, 10}.
/// Ties keep the earlier grid point.
pub fn grid_search(data: &[TrainingExample], base: &SvmParams, k: usize, seed: u64, exec: Execution) -> Result<GridResult, SvmError> {
    let dim = check_data(data)?;
    let mut scores = Vec::new();
    for gm in [0.1, 1.0, 10.0] {
        for c in [0.1, 1.0, 10.0] {
            let p = SvmParams { gamma: Some(gm / dim as f64), c, ..*base };
            let rep = cross_validate(data, k, &p, seed, exec)?;
            scores.push((p, rep.mean_accuracy));
        }
    }
    let best = scores.iter().fold(scores[0], |acc, s| if s.1 > acc.1 { *s } else { acc }).0;
    Ok(GridResult { best, scores })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn folds_are_balanced_and_stratified() {
        let labels: Vec<bool> = (0..100).map(|i| i % 4 == 0).collect();
        let f = stratified_folds(&labels, 5, 3);
        for k in 0..5 {
            assert_eq!(f.iter().filter(|&&x| x == k).count(), 20);
            assert_eq!((0..100).filter(|&i| f[i] == k && labels[i]).count(), 5);
        }
        assert_eq!(f, stratified_folds(&labels, 5, 3));
        let labels: Vec<bool> = (0..23).map(|i| i % 3 == 0).collect();
        let f = stratified_folds(&labels, 5, 1);
        let sizes: Vec<usize> = (0..5).map(|k| f.iter().filter(|&&x| x == k).count()).collect();
        assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
    }

    #[test]
    fn split_keeps_both_classes() {
        let labels: Vec<bool> = (0..50).map(|i| i < 10).collect();
        let (tr, ho) = stratified_split(&labels, 0.2, 0);
        assert_eq!(ho.len(), 10);
        assert_eq!(ho.iter().filter(|&&i| labels[i]).count(), 2);
        assert_eq!(tr.len() + ho.len(), 50);
    }

    #[test]
    fn separable_data_scores_perfectly() {
        let data: Vec<TrainingExample> = (0..100)
            .map(|i| {
                let pos = i % 2 == 0;
                let x = (i as f64 * 0.618).fract();
                TrainingExample::new(vec![if pos { 2.0 + x } else { -2.0 - x }, x], pos)
            })
            .collect();
        let rep = cross_validate(&data, 5, &SvmParams::default(), 7, Execution::Sequential).unwrap();
        assert_eq!(rep.fold_sizes, vec![20; 5]);
        assert_eq!(rep.mean_accuracy, 1.0);
        let again = cross_validate(&data, 5, &SvmParams::default(), 7, Execution::Parallel).unwrap();
        assert_eq!(rep, again);
    }
}
