//! Sequential minimal optimization on the soft-margin dual
//!
//!   max  Σα − ½ Σᵢⱼ αᵢαⱼyᵢyⱼK(xᵢ,xⱼ)   s.t.  0 ≤ α ≤ C,  Σαy = 0.
//!
//! Training runs the randomized simplified SMO until `max_passes` quiet
//! sweeps, then finishes with maximal-violating-pair steps until the KKT gap
//! is well inside `tol`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::kernel::{dot, rbf_from_parts, Kernel};
use super::{check_data, SvmError, SvmModel, SvmParams, TrainingExample};
use crate::exec::Execution;

/// Largest problem for which the full kernel matrix is cached.
const DENSE_LIMIT: usize = 5000;
/// Cap on randomized sweeps before moving to the polish phase.
const MAX_SWEEPS: usize = 500;
/// The polish phase drives the KKT gap below this fraction of `tol`.
const POLISH_FRACTION: f64 = 0.01;

enum Gram<'a> {
    Dense { n: usize, k: Vec<f64> },
    Lazy { kernel: Kernel, data: &'a [TrainingExample], norms: Vec<f64> },
}

impl<'a> Gram<'a> {
    fn new(kernel: Kernel, data: &'a [TrainingExample], exec: Execution) -> Self {
        let n = data.len();
        let norms: Vec<f64> = data.iter().map(|e| dot(&e.features, &e.features)).collect();
        if n > DENSE_LIMIT {
            return Gram::Lazy { kernel, data, norms };
        }
        let mut k = vec![0.0; n * n];
        exec.fill_chunks(&mut k, n, |i, row| {
            let xi = &data[i].features;
            for (j, v) in row.iter_mut().enumerate() {
                let ab = dot(xi, &data[j].features);
                *v = match kernel {
                    Kernel::Linear => ab,
                    Kernel::Rbf { gamma } => rbf_from_parts(gamma, norms[i], norms[j], ab),
                };
            }
        });
        // exact symmetry regardless of summation order
        for i in 0..n {
            for j in 0..i {
                k[i * n + j] = k[j * n + i];
            }
        }
        Gram::Dense { n, k }
    }

    #[inline]
    fn get(&self, i: usize, j: usize) -> f64 {
        match self {
            Gram::Dense { n, k } => k[i * n + j],
            Gram::Lazy { kernel, data, norms } => {
                let (a, b) = if i <= j { (i, j) } else { (j, i) };
                kernel.eval_with_norms(&data[a].features, norms[a], &data[b].features, norms[b])
            }
        }
    }
}

/// Full solver output, including multipliers for every training example.
#[derive(Debug, Clone)]
pub struct SmoSolution {
    pub alphas: Vec<f64>,
    pub bias: f64,
    pub objective: f64,
    /// Final m − M gap of the maximal violating pair.
    pub kkt_gap: f64,
    pub sweeps: usize,
    pub polish_steps: usize,
}

struct Solver<'a> {
    gram: Gram<'a>,
    y: Vec<f64>,
    alpha: Vec<f64>,
    /// Σⱼ αⱼyⱼK(t, j), i.e. the decision value without bias.
    f: Vec<f64>,
    b: f64,
    c: f64,
}

impl Solver<'_> {
    fn n(&self) -> usize {
        self.y.len()
    }

    /// Exact solve of the two-variable subproblem on (i, j).
    fn take_step(&mut self, i: usize, j: usize, min_change: f64, update_bias: bool) -> bool {
        if i == j {
            return false;
        }
        let (yi, yj) = (self.y[i], self.y[j]);
        let (ai, aj) = (self.alpha[i], self.alpha[j]);
        let c = self.c;
        let (lo, hi) = if yi != yj { ((aj - ai).max(0.0), (c + aj - ai).min(c)) } else { ((ai + aj - c).max(0.0), (ai + aj).min(c)) };
        if hi - lo <= 1e-15 * c {
            return false;
        }
        let ei = self.f[i] + self.b - yi;
        let ej = self.f[j] + self.b - yj;
        let (kii, kjj, kij) = (self.gram.get(i, i), self.gram.get(j, j), self.gram.get(i, j));
        let eta = (kii + kjj - 2.0 * kij).max(1e-12);
        let mut aj_new = (aj + yj * (ei - ej) / eta).clamp(lo, hi);
        if aj_new < 1e-12 * c {
            aj_new = 0.0;
        } else if aj_new > c * (1.0 - 1e-12) {
            aj_new = c;
        }
        if (aj_new - aj).abs() <= min_change {
            return false;
        }
        let mut ai_new = ai + yi * yj * (aj - aj_new);
        if ai_new < 1e-12 * c {
            ai_new = 0.0;
        } else if ai_new > c * (1.0 - 1e-12) {
            ai_new = c;
        }
        let (di, dj) = ((ai_new - ai) * yi, (aj_new - aj) * yj);
        if update_bias {
            let b1 = self.b - ei - di * kii - dj * kij;
            let b2 = self.b - ej - di * kij - dj * kjj;
            self.b = if ai_new > 0.0 && ai_new < c {
                b1
            } else if aj_new > 0.0 && aj_new < c {
                b2
            } else {
                0.5 * (b1 + b2)
            };
        }
        for t in 0..self.n() {
            self.f[t] += di * self.gram.get(i, t) + dj * self.gram.get(j, t);
        }
        self.alpha[i] = ai_new;
        self.alpha[j] = aj_new;
        true
    }

    fn v(&self, t: usize) -> f64 {
        self.y[t] - self.f[t]
    }

    fn in_up(&self, t: usize) -> bool {
        (self.y[t] > 0.0 && self.alpha[t] < self.c) || (self.y[t] < 0.0 && self.alpha[t] > 0.0)
    }

    fn in_low(&self, t: usize) -> bool {
        (self.y[t] < 0.0 && self.alpha[t] < self.c) || (self.y[t] > 0.0 && self.alpha[t] > 0.0)
    }

    /// (argmax v over I_up, m, argmin v over I_low, M)
    fn violating_pair(&self) -> (usize, f64, usize, f64) {
        let (mut i, mut m, mut j, mut mm) = (usize::MAX, f64::NEG_INFINITY, usize::MAX, f64::INFINITY);
        for t in 0..self.n() {
            let v = self.v(t);
            if self.in_up(t) && v > m {
                i = t;
                m = v;
            }
            if self.in_low(t) && v < mm {
                j = t;
                mm = v;
            }
        }
        (i, m, j, mm)
    }

    fn simplified_phase(&mut self, params: &SvmParams, rng: &mut ChaCha8Rng) -> usize {
        let n = self.n();
        let (mut passes, mut sweeps) = (0, 0);
        while passes < params.max_passes && sweeps < MAX_SWEEPS {
            let mut changed = 0;
            for i in 0..n {
                let ei = self.f[i] + self.b - self.y[i];
                let r = self.y[i] * ei;
                if (r < -params.tol && self.alpha[i] < self.c) || (r > params.tol && self.alpha[i] > 0.0) {
                    let mut j = rng.random_range(0..n - 1);
                    if j >= i {
                        j += 1;
                    }
                    if self.take_step(i, j, params.eps, true) {
                        changed += 1;
                    }
                }
            }
            sweeps += 1;
            passes = if changed == 0 { passes + 1 } else { 0 };
        }
        sweeps
    }

    fn polish_phase(&mut self, target: f64) -> (usize, f64) {
        let limit = 200 * self.n() + 100_000;
        let mut steps = 0;
        loop {
            let (i, m, j, mm) = self.violating_pair();
            let gap = m - mm;
            if i == usize::MAX || j == usize::MAX || gap <= target || steps >= limit {
                return (steps, if gap.is_finite() { gap.max(0.0) } else { 0.0 });
            }
            if !self.take_step(i, j, 0.0, false) {
                return (steps, gap);
            }
            steps += 1;
        }
    }

    fn final_bias(&self) -> f64 {
        let free: Vec<f64> = (0..self.n()).filter(|&t| self.alpha[t] > 0.0 && self.alpha[t] < self.c).map(|t| self.v(t)).collect();
        if !free.is_empty() {
            return free.iter().sum::<f64>() / free.len() as f64;
        }
        let (_, m, _, mm) = self.violating_pair();
        match (m.is_finite(), mm.is_finite()) {
            (true, true) => 0.5 * (m + mm),
            (true, false) => m,
            (false, true) => mm,
            _ => 0.0,
        }
    }
}

/// Dual objective Σα − ½ αᵀQα for multipliers `alphas` on `data`.
pub fn dual_objective(data: &[TrainingExample], alphas: &[f64], kernel: Kernel) -> f64 {
    let mut quad = 0.0;
    for (i, ei) in data.iter().enumerate() {
        if alphas[i] == 0.0 {
            continue;
        }
        for (j, ej) in data.iter().enumerate() {
            if alphas[j] != 0.0 {
                quad += alphas[i] * alphas[j] * ei.y() * ej.y() * kernel.eval(&ei.features, &ej.features);
            }
        }
    }
    alphas.iter().sum::<f64>() - 0.5 * quad
}

pub fn train_smo(data: &[TrainingExample], params: &SvmParams, seed: u64) -> Result<SvmModel, SvmError> {
    train_smo_detailed(data, params, seed, Execution::default()).map(|(m, _)| m)
}

pub fn train_smo_detailed(data: &[TrainingExample], params: &SvmParams, seed: u64, exec: Execution) -> Result<(SvmModel, SmoSolution), SvmError> {
    params.validate()?;
    let dim = check_data(data)?;
    let kernel = params.resolve_kernel(dim);
    let n = data.len();
    let mut s = Solver {
        gram: Gram::new(kernel, data, exec),
        y: data.iter().map(|e| e.y()).collect(),
        alpha: vec![0.0; n],
        f: vec![0.0; n],
        b: 0.0,
        c: params.c,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sweeps = s.simplified_phase(params, &mut rng);
    let (polish_steps, kkt_gap) = s.polish_phase(params.tol * POLISH_FRACTION);
    let bias = s.final_bias();
    let objective = s.alpha.iter().sum::<f64>() - 0.5 * (0..n).map(|t| s.alpha[t] * s.y[t] * s.f[t]).sum::<f64>();

    let (mut svs, mut coef) = (Vec::new(), Vec::new());
    for (t, ex) in data.iter().enumerate() {
        if s.alpha[t] > 0.0 {
            svs.push(ex.features.clone());
            coef.push(s.alpha[t] * s.y[t]);
        }
    }
    let model = SvmModel::new(kernel, params.c, params.tol, dim, svs, coef, bias)?;
    #[cfg(debug_assertions)]
    {
        let audit = kkt_audit(&model, data, &s.alpha);
        debug_assert!(audit.passes(params.tol), "KKT audit failed after training: {audit:?}");
    }
    log::debug!("smo: n={n} sv={} sweeps={sweeps} polish={polish_steps} gap={kkt_gap:.2e}", model.n_support());
    Ok((model, SmoSolution { alphas: s.alpha, bias, objective, kkt_gap, sweeps, polish_steps }))
}

#[derive(Debug, Clone, PartialEq)]
pub struct KktReport {
    pub max_violation: f64,
    pub worst_index: Option<usize>,
    pub equality_residual: f64,
    pub box_ok: bool,
}

impl KktReport {
    pub fn passes(&self, tol: f64) -> bool {
        self.box_ok && self.max_violation <= tol
    }
}

/// Checks complementarity of `alphas` against the model's own decision values:
/// α = 0 ⇒ y·f ≥ 1, 0 < α < C ⇒ y·f = 1, α = C ⇒ y·f ≤ 1.
pub fn kkt_audit(model: &SvmModel, data: &[TrainingExample], alphas: &[f64]) -> KktReport {
    let c = model.c;
    let mut max_violation: f64 = 0.0;
    let mut worst = None;
    let mut residual = 0.0;
    let mut box_ok = true;
    for (t, (ex, &a)) in data.iter().zip(alphas).enumerate() {
        box_ok &= (0.0..=c).contains(&a);
        residual += a * ex.y();
        let r = ex.y() * model.decision_value_unchecked(&ex.features) - 1.0;
        let viol = if a == 0.0 {
            (-r).max(0.0)
        } else if a == c {
            r.max(0.0)
        } else {
            r.abs()
        };
        if viol > max_violation {
            max_violation = viol;
            worst = Some(t);
        }
    }
    KktReport { max_violation, worst_index: worst, equality_residual: residual.abs(), box_ok }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn blobs(n: usize, seed: u64, dim: usize, sep: f64) -> Vec<TrainingExample> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|i| {
                let pos = i % 2 == 0;
                let x = (0..dim).map(|_| rng.random::<f64>() + if pos { sep } else { 0.0 }).collect();
                TrainingExample::new(x, pos)
            })
            .collect()
    }

    #[test]
    fn kkt_and_feasibility_hold() {
        for (seed, params) in [(1, SvmParams::default()), (2, SvmParams::linear(0.5)), (3, SvmParams::rbf(2.0, 10.0))] {
            let data = blobs(80, seed, 4, 0.3);
            let (m, sol) = train_smo_detailed(&data, &params, seed, Execution::Sequential).unwrap();
            let rep = kkt_audit(&m, &data, &sol.alphas);
            assert!(rep.passes(params.tol), "{rep:?}");
            let sum: f64 = sol.alphas.iter().sum();
            assert!(rep.equality_residual <= 1e-8 * sum.max(1.0));
        }
    }

    #[test]
    fn deterministic_and_exec_independent() {
        let data = blobs(60, 9, 3, 0.2);
        let (a, sa) = train_smo_detailed(&data, &SvmParams::default(), 5, Execution::Sequential).unwrap();
        let (b, sb) = train_smo_detailed(&data, &SvmParams::default(), 5, Execution::Parallel).unwrap();
        assert_eq!(a, b);
        assert_eq!(sa.alphas, sb.alphas);
    }

    #[test]
    fn lazy_gram_agrees_with_dense() {
        let data = blobs(20, 4, 3, 0.5);
        let k = Kernel::Rbf { gamma: 0.7 };
        let dense = Gram::new(k, &data, Execution::Sequential);
        let norms = data.iter().map(|e| dot(&e.features, &e.features)).collect();
        let lazy = Gram::Lazy { kernel: k, data: &data, norms };
        for i in 0..20 {
            for j in 0..20 {
                assert!((dense.get(i, j) - lazy.get(i, j)).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn objective_matches_direct_evaluation() {
        let data = blobs(40, 11, 2, 0.1);
        let (m, sol) = train_smo_detailed(&data, &SvmParams::default(), 0, Execution::Sequential).unwrap();
        let direct = dual_objective(&data, &sol.alphas, m.kernel);
        assert!((direct - sol.objective).abs() < 1e-9);
    }
}
