//! Reference solver for the soft-margin SVM dual
//!
//!   min ½ αᵀQα − Σα   s.t.  0 ≤ α ≤ C,  yᵀα = 0,   Q = (yᵢyⱼKᵢⱼ)
//!
//! by accelerated projected gradient. Slow and simple: it exists only to
//! check the production trainer on small problems.

/// Kernel used by the oracle; written out independently of the trainer.
#[derive(Debug, Clone, Copy)]
pub enum OracleKernel {
    Linear,
    Rbf(f64),
}

impl OracleKernel {
    pub fn eval(&self, a: &[f64], b: &[f64]) -> f64 {
        match *self {
            OracleKernel::Linear => a.iter().zip(b).map(|(x, y)| x * y).sum(),
            OracleKernel::Rbf(g) => (-g * a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>()).exp(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct OracleSolution {
    pub alpha: Vec<f64>,
    /// Dual objective in maximization form: Σα − ½ αᵀQα.
    pub objective: f64,
    pub bias: f64,
    pub iterations: usize,
}

/// Euclidean projection onto {0 ≤ α ≤ C, yᵀα = 0} by bisection on the
/// multiplier of the equality constraint.
pub fn project(z: &[f64], y: &[f64], c: f64) -> Vec<f64> {
    let at = |lam: f64| -> Vec<f64> { z.iter().zip(y).map(|(&zi, &yi)| (zi - lam * yi).clamp(0.0, c)).collect() };
    let g = |lam: f64| -> f64 { at(lam).iter().zip(y).map(|(a, yi)| a * yi).sum() };
    // g is non-increasing in λ
    let mut lo = -1.0;
    let mut hi = 1.0;
    while g(lo) < 0.0 {
        lo *= 2.0;
    }
    while g(hi) > 0.0 {
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if g(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    at(0.5 * (lo + hi))
}

fn largest_eigenvalue(q: &[Vec<f64>]) -> f64 {
    let n = q.len();
    let mut v = vec![1.0 / (n as f64).sqrt(); n];
    let mut lam = 0.0;
    for _ in 0..500 {
        let w: Vec<f64> = (0..n).map(|i| (0..n).map(|j| q[i][j] * v[j]).sum()).collect();
        let norm = w.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm == 0.0 {
            return 0.0;
        }
        lam = norm;
        v = w.into_iter().map(|x| x / norm).collect();
    }
    lam
}

fn objective(q: &[Vec<f64>], a: &[f64]) -> f64 {
    let n = a.len();
    let quad: f64 = (0..n).map(|i| (0..n).map(|j| a[i] * q[i][j] * a[j]).sum::<f64>()).sum();
    a.iter().sum::<f64>() - 0.5 * quad
}

/// Solves the dual for training points `x`, labels `y` ∈ {−1, +1} and box `c`.
pub fn solve(x: &[Vec<f64>], y: &[f64], c: f64, kernel: OracleKernel) -> OracleSolution {
    let n = x.len();
    let k: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| kernel.eval(&x[i], &x[j])).collect()).collect();
    let q: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| y[i] * y[j] * k[i][j]).collect()).collect();
    let step = 1.0 / (largest_eigenvalue(&q) * 1.01).max(1e-12);
    let grad = |a: &[f64]| -> Vec<f64> { (0..n).map(|i| (0..n).map(|j| q[i][j] * a[j]).sum::<f64>() - 1.0).collect() };

    let mut a = vec![0.0; n];
    let mut prev = a.clone();
    let mut t = 1.0f64;
    let mut iterations = 0;
    let mut last = objective(&q, &a);
    for it in 0..1_000_000 {
        iterations = it + 1;
        let tn = (1.0 + (1.0 + 4.0 * t * t).sqrt()) / 2.0;
        let mom = (t - 1.0) / tn;
        let yk: Vec<f64> = a.iter().zip(&prev).map(|(ai, pi)| ai + mom * (ai - pi)).collect();
        let g = grad(&yk);
        let z: Vec<f64> = yk.iter().zip(&g).map(|(yi, gi)| yi - step * gi).collect();
        let next = project(&z, y, c);
        let obj = objective(&q, &next);
        let moved: f64 = next.iter().zip(&a).map(|(x, y)| (x - y).abs()).sum();
        prev = std::mem::replace(&mut a, next);
        if obj < last {
            // adaptive restart keeps the iteration monotone
            t = 1.0;
            prev = a.clone();
        } else {
            t = tn;
        }
        last = obj;
        if it > 100 && moved < 1e-15 * c.max(1.0) * n as f64 {
            break;
        }
    }
    let bias = bias(&k, y, &a, c);
    OracleSolution { objective: objective(&q, &a), alpha: a, bias, iterations }
}

fn bias(k: &[Vec<f64>], y: &[f64], a: &[f64], c: f64) -> f64 {
    let n = a.len();
    let tol = 1e-8 * c;
    let v: Vec<f64> = (0..n).map(|t| y[t] - (0..n).map(|j| a[j] * y[j] * k[t][j]).sum::<f64>()).collect();
    let free: Vec<f64> = (0..n).filter(|&t| a[t] > tol && a[t] < c - tol).map(|t| v[t]).collect();
    if !free.is_empty() {
        return free.iter().sum::<f64>() / free.len() as f64;
    }
    let (mut lo, mut hi) = (f64::NEG_INFINITY, f64::INFINITY);
    for t in 0..n {
        let at_zero = a[t] <= tol;
        if (y[t] > 0.0) == at_zero {
            lo = lo.max(v[t]);
        } else {
            hi = hi.min(v[t]);
        }
    }
    match (lo.is_finite(), hi.is_finite()) {
        (true, true) => 0.5 * (lo + hi),
        (true, false) => lo,
        (false, true) => hi,
        _ => 0.0,
    }
}

/// Decision value of the oracle solution at `p`.
pub fn decision(sol: &OracleSolution, x: &[Vec<f64>], y: &[f64], kernel: OracleKernel, p: &[f64]) -> f64 {
    sol.alpha.iter().zip(x).zip(y).map(|((a, xi), yi)| a * yi * kernel.eval(xi, p)).sum::<f64>() + sol.bias
}

/// A small labelled problem with its held-out probe points.
#[derive(Debug, Clone)]
pub struct Case {
    pub x: Vec<Vec<f64>>,
    pub y: Vec<f64>,
    pub c: f64,
    pub kernel: OracleKernel,
    pub probes: Vec<Vec<f64>>,
}

/// `count` seeded problems with 4–20 points in 2–5 dimensions, alternating
/// linear and RBF kernels, overlapping classes and C ∈ {0.1, 1, 10}.
pub fn seeded_cases(seed: u64, count: usize) -> Vec<Case> {
    use rand::{Rng, SeedableRng};
    use rand_distr::{Distribution, StandardNormal};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|i| {
            let n = rng.random_range(4..=20usize);
            let dim = rng.random_range(2..=5usize);
            let shift: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.5..1.5)).collect();
            let mut x = Vec::with_capacity(n);
            let mut y = Vec::with_capacity(n);
            for t in 0..n {
                let label = if t % 2 == 0 { 1.0 } else { -1.0 };
                let p: Vec<f64> =
                    shift.iter().map(|s| label * s + <StandardNormal as Distribution<f64>>::sample(&StandardNormal, &mut rng)).collect();
                x.push(p);
                y.push(label);
            }
            let kernel = if i % 2 == 0 { OracleKernel::Linear } else { OracleKernel::Rbf([0.1, 0.5, 1.0][rng.random_range(0..3)]) };
            let c = [0.1, 1.0, 10.0][rng.random_range(0..3)];
            let probes = (0..100).map(|_| (0..dim).map(|_| rng.random_range(-3.0..3.0)).collect()).collect();
            Case { x, y, c, kernel, probes }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn projection_is_feasible() {
        let y = [1.0, -1.0, 1.0, -1.0, 1.0];
        let p = project(&[3.0, -2.0, 0.5, 0.7, 0.1], &y, 1.0);
        assert!(p.iter().all(|&a| (0.0..=1.0).contains(&a)));
        assert!(p.iter().zip(&y).map(|(a, y)| a * y).sum::<f64>().abs() < 1e-12);
    }

    #[test]
    fn two_point_problem_has_closed_form() {
        // x = ±1 on a line, linear kernel: α = (½, ½), objective ½, b = 0
        let x = vec![vec![-1.0], vec![1.0]];
        let y = [-1.0, 1.0];
        let s = solve(&x, &y, 10.0, OracleKernel::Linear);
        assert!((s.alpha[0] - 0.5).abs() < 1e-9 && (s.alpha[1] - 0.5).abs() < 1e-9);
        assert!((s.objective - 0.5).abs() < 1e-9);
        assert!(s.bias.abs() < 1e-9);
    }
}
