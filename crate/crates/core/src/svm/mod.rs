//! Binary kernel SVM trained with SMO, with Platt-scaled probability outputs
//! and stratified k-fold cross-validation.
//!
//! Labels are `0`/`1` on the outside and `-1`/`+1` inside the solver.

mod cv;
mod kernel;
mod platt;
mod smo;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::exec::Execution;

pub use cv::{cross_validate, grid_search, stratified_folds, stratified_split, train_calibrated, CvReport, GridResult};
pub use kernel::{dot, Kernel};
pub use platt::{fit_sigmoid, sigmoid_proba, PlattParams};
pub use smo::{dual_objective, kkt_audit, train_smo, train_smo_detailed, KktReport, SmoSolution};

pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SvmError {
    #[error("degenerate training data: {0}")]
    DegenerateData(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("model has no probability calibration")]
    Uncalibrated,
    #[error("invalid SVM parameters: {0}")]
    InvalidParams(String),
    #[error("unsupported model version {0}")]
    Version(u32),
    #[error("malformed model file: {0}")]
    Format(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingExample {
    pub features: Vec<f64>,
    /// 1 = chosen, 0 = not chosen.
    pub label: u8,
}

impl TrainingExample {
    pub fn new(features: Vec<f64>, label: bool) -> Self {
        TrainingExample { features, label: label as u8 }
    }

    pub fn positive(&self) -> bool {
        self.label == 1
    }

    pub(crate) fn y(&self) -> f64 {
        if self.positive() {
            1.0
        } else {
            -1.0
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelKind {
    Linear,
    Rbf,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SvmParams {
    pub kernel: KernelKind,
    /// RBF width; `None` means 1 / feature dimension.
    pub gamma: Option<f64>,
    pub c: f64,
    /// KKT tolerance.
    pub tol: f64,
    pub max_passes: usize,
    /// Smallest alpha change accepted during the randomized sweeps.
    pub eps: f64,
}

impl Default for SvmParams {
    fn default() -> Self {
        SvmParams { kernel: KernelKind::Rbf, gamma: None, c: 1.0, tol: 1e-3, max_passes: 10, eps: 1e-5 }
    }
}

impl SvmParams {
    pub fn linear(c: f64) -> Self {
        SvmParams { kernel: KernelKind::Linear, c, ..Default::default() }
    }

    pub fn rbf(gamma: f64, c: f64) -> Self {
        SvmParams { kernel: KernelKind::Rbf, gamma: Some(gamma), c, ..Default::default() }
    }

    pub fn validate(&self) -> Result<(), SvmError> {
        if !(self.c > 0.0 && self.c.is_finite()) {
            return Err(SvmError::InvalidParams(format!("c must be positive, got {}", self.c)));
        }
        if let Some(g) = self.gamma {
            if !(g > 0.0 && g.is_finite()) {
                return Err(SvmError::InvalidParams(format!("gamma must be positive, got {g}")));
            }
        }
        if !(self.tol > 0.0) || !(self.eps >= 0.0) {
            return Err(SvmError::InvalidParams("tol must be positive and eps non-negative".into()));
        }
        Ok(())
    }

    pub fn resolve_kernel(&self, dim: usize) -> Kernel {
        match self.kernel {
            KernelKind::Linear => Kernel::Linear,
            KernelKind::Rbf => Kernel::Rbf { gamma: self.gamma.unwrap_or(1.0 / dim.max(1) as f64) },
        }
    }
}

/// A trained classifier. Immutable once calibrated; safe to share across threads.
#[derive(Debug, Clone, PartialEq)]
pub struct SvmModel {
    pub kernel: Kernel,
    pub c: f64,
    pub tol: f64,
    pub dim: usize,
    /// Support vectors, row-major, `dim` values each.
    sv_data: Vec<f64>,
    sv_norms: Vec<f64>,
    pub alphas_signed: Vec<f64>,
    pub bias: f64,
    pub platt: Option<PlattParams>,
}

impl SvmModel {
    pub fn new(
        kernel: Kernel,
        c: f64,
        tol: f64,
        dim: usize,
        support_vectors: Vec<Vec<f64>>,
        alphas_signed: Vec<f64>,
        bias: f64,
    ) -> Result<Self, SvmError> {
        if support_vectors.len() != alphas_signed.len() {
            return Err(SvmError::Format("support vector and coefficient counts differ".into()));
        }
        let mut sv_data = Vec::with_capacity(dim * support_vectors.len());
        for sv in &support_vectors {
            if sv.len() != dim {
                return Err(SvmError::DimensionMismatch { expected: dim, got: sv.len() });
            }
            sv_data.extend_from_slice(sv);
        }
        let sv_norms = sv_data.chunks_exact(dim.max(1)).map(|r| dot(r, r)).collect();
        let sv_norms = if dim == 0 { vec![0.0; alphas_signed.len()] } else { sv_norms };
        Ok(SvmModel { kernel, c, tol, dim, sv_data, sv_norms, alphas_signed, bias, platt: None })
    }

    pub fn n_support(&self) -> usize {
        self.alphas_signed.len()
    }

    pub fn support_vector(&self, i: usize) -> &[f64] {
        &self.sv_data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn support_vectors(&self) -> impl Iterator<Item = &[f64]> {
        (0..self.n_support()).map(|i| self.support_vector(i))
    }

    fn check_dim(&self, x: &[f64]) -> Result<(), SvmError> {
        if x.len() != self.dim {
            return Err(SvmError::DimensionMismatch { expected: self.dim, got: x.len() });
        }
        Ok(())
    }

    pub fn decision_value(&self, x: &[f64]) -> Result<f64, SvmError> {
        self.check_dim(x)?;
        Ok(self.decision_value_unchecked(x))
    }

    pub(crate) fn decision_value_unchecked(&self, x: &[f64]) -> f64 {
        let nx = dot(x, x);
        let mut s = 0.0;
        for (i, &a) in self.alphas_signed.iter().enumerate() {
            s += a * self.kernel.eval_with_norms(self.support_vector(i), self.sv_norms[i], x, nx);
        }
        s + self.bias
    }

    pub fn decision_values(&self, xs: &[Vec<f64>], exec: Execution) -> Result<Vec<f64>, SvmError> {
        for x in xs {
            self.check_dim(x)?;
        }
        Ok(exec.map(xs, |x| self.decision_value_unchecked(x)))
    }

    /// Fits the Platt sigmoid on held-out examples and stores it.
    pub fn fit_platt(&mut self, holdout: &[TrainingExample]) -> Result<(), SvmError> {
        let mut f = Vec::with_capacity(holdout.len());
        for ex in holdout {
            f.push(self.decision_value(&ex.features)?);
        }
        let labels: Vec<bool> = holdout.iter().map(|e| e.positive()).collect();
        self.platt = Some(fit_sigmoid(&f, &labels)?);
        Ok(())
    }

    /// Calibrated P(chosen = 1), strictly inside (0, 1).
    pub fn predict_proba(&self, x: &[f64]) -> Result<f64, SvmError> {
        let platt = self.platt.ok_or(SvmError::Uncalibrated)?;
        Ok(sigmoid_proba(platt, self.decision_value(x)?))
    }

    pub fn proba_from_decision(&self, f: f64) -> Result<f64, SvmError> {
        Ok(sigmoid_proba(self.platt.ok_or(SvmError::Uncalibrated)?, f))
    }

    /// Predicted label: calibrated probability ≥ 0.5 when available, else sign of f.
    pub fn predict_label(&self, x: &[f64]) -> Result<bool, SvmError> {
        match self.platt {
            Some(_) => Ok(self.predict_proba(x)? >= 0.5),
            None => Ok(self.decision_value(x)? >= 0.0),
        }
    }

    pub fn to_file(&self) -> ModelFile {
        ModelFile {
            version: MODEL_FORMAT_VERSION,
            kernel: self.kernel.name().to_string(),
            gamma: self.kernel.gamma(),
            c: self.c,
            tol: self.tol,
            dim: self.dim,
            platt: self.platt.map(|p| [p.a, p.b]),
            bias: self.bias,
            svs: self.support_vectors().map(|s| s.to_vec()).collect(),
            alphas_signed: self.alphas_signed.clone(),
        }
    }

    pub fn from_file(f: ModelFile) -> Result<Self, SvmError> {
        if f.version != MODEL_FORMAT_VERSION {
            return Err(SvmError::Version(f.version));
        }
        let kernel = match (f.kernel.as_str(), f.gamma) {
            ("linear", _) => Kernel::Linear,
            ("rbf", Some(gamma)) if gamma > 0.0 && gamma.is_finite() => Kernel::Rbf { gamma },
            (k, g) => return Err(SvmError::Format(format!("bad kernel {k:?} with gamma {g:?}"))),
        };
        if !f.alphas_signed.iter().chain(f.svs.iter().flatten()).all(|v| v.is_finite()) || !f.bias.is_finite() {
            return Err(SvmError::Format("non-finite coefficient".into()));
        }
        let mut m = SvmModel::new(kernel, f.c, f.tol, f.dim, f.svs, f.alphas_signed, f.bias)?;
        m.platt = f.platt.map(|[a, b]| PlattParams { a, b });
        Ok(m)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&self.to_file()).expect("model serializes")
    }

    pub fn from_json(s: &str) -> Result<Self, SvmError> {
        let f: ModelFile = serde_json::from_str(s).map_err(|e| SvmError::Format(e.to_string()))?;
        Self::from_file(f)
    }
}

/// On-disk model representation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelFile {
    pub version: u32,
    pub kernel: String,
    pub gamma: Option<f64>,
    pub c: f64,
    pub tol: f64,
    pub dim: usize,
    pub platt: Option<[f64; 2]>,
    pub bias: f64,
    pub svs: Vec<Vec<f64>>,
    pub alphas_signed: Vec<f64>,
}

pub(crate) fn check_data(data: &[TrainingExample]) -> Result<usize, SvmError> {
    let first = data.first().ok_or_else(|| SvmError::DegenerateData("no examples".into()))?;
    let dim = first.features.len();
    for ex in data {
        if ex.features.len() != dim {
            return Err(SvmError::DimensionMismatch { expected: dim, got: ex.features.len() });
        }
        if ex.label > 1 {
            return Err(SvmError::DegenerateData(format!("label {} is not 0 or 1", ex.label)));
        }
        if !ex.features.iter().all(|v| v.is_finite()) {
            return Err(SvmError::DegenerateData("non-finite feature".into()));
        }
    }
    let pos = data.iter().filter(|e| e.positive()).count();
    if pos == 0 || pos == data.len() {
        return Err(SvmError::DegenerateData("training data holds a single class".into()));
    }
    Ok(dim)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ex(x: &[f64], l: bool) -> TrainingExample {
        TrainingExample::new(x.to_vec(), l)
    }

    fn two_point() -> SvmModel {
        let data = vec![ex(&[-1.0, 0.0], false), ex(&[1.0, 0.0], true)];
        train_smo(&data, &SvmParams::linear(1.0), 0).unwrap()
    }

    #[test]
    fn two_point_boundary_at_origin() {
        let m = two_point();
        assert!(m.decision_value(&[0.0, 0.0]).unwrap().abs() < 1e-9);
        // margin: w = (1, 0), b = 0, so support vectors sit at ±1
        assert!((m.decision_value(&[1.0, 0.0]).unwrap() - 1.0).abs() < 1e-6);
        assert!((m.decision_value(&[-1.0, 0.0]).unwrap() + 1.0).abs() < 1e-6);
        let f: Vec<f64> = [0.0, 0.5, 1.0].iter().map(|&x| m.decision_value(&[x, 3.0]).unwrap()).collect();
        assert!(((f[1] - f[0]) - (f[2] - f[1])).abs() < 1e-12);
    }

    #[test]
    fn xor_rbf() {
        let data = vec![ex(&[0.0, 0.0], false), ex(&[1.0, 1.0], false), ex(&[0.0, 1.0], true), ex(&[1.0, 0.0], true)];
        let m = train_smo(&data, &SvmParams::rbf(1.0, 10.0), 3).unwrap();
        for e in &data {
            assert_eq!(m.decision_value(&e.features).unwrap() > 0.0, e.positive());
        }
    }

    #[test]
    fn errors() {
        let one_class = vec![ex(&[0.0], true), ex(&[1.0], true)];
        assert!(matches!(train_smo(&one_class, &SvmParams::default(), 0), Err(SvmError::DegenerateData(_))));
        let ragged = vec![ex(&[0.0], true), ex(&[1.0, 2.0], false)];
        assert!(matches!(train_smo(&ragged, &SvmParams::default(), 0), Err(SvmError::DimensionMismatch { .. })));
        let m = two_point();
        assert!(matches!(m.decision_value(&[0.0]), Err(SvmError::DimensionMismatch { .. })));
        assert_eq!(m.predict_proba(&[0.0, 0.0]), Err(SvmError::Uncalibrated));
        assert!(SvmParams { c: 0.0, ..Default::default() }.validate().is_err());
        assert!(SvmParams { gamma: Some(-1.0), ..Default::default() }.validate().is_err());
    }

    #[test]
    fn model_json_roundtrip_is_exact() {
        let data: Vec<TrainingExample> = (0..30)
            .map(|i| {
                let x = (i as f64 * 0.731).sin();
                let y = (i as f64 * 1.37).cos();
                ex(&[x, y, x * y], x + 0.3 * y > 0.1)
            })
            .collect();
        let mut m = train_smo(&data, &SvmParams::default(), 1).unwrap();
        m.fit_platt(&data).unwrap();
        let back = SvmModel::from_json(&m.to_json()).unwrap();
        assert_eq!(back, m);
        for e in &data {
            assert_eq!(back.decision_value(&e.features).unwrap(), m.decision_value(&e.features).unwrap());
        }
        let mut f = m.to_file();
        f.version = 9;
        assert_eq!(SvmModel::from_file(f), Err(SvmError::Version(9)));
        assert!(SvmModel::from_json("{\"version\":1}").is_err());
    }

    #[test]
    fn resolve_gamma_default() {
        assert_eq!(SvmParams::default().resolve_kernel(300), Kernel::Rbf { gamma: 1.0 / 300.0 });
        assert_eq!(SvmParams::linear(1.0).resolve_kernel(3), Kernel::Linear);
    }
}
