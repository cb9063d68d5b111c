use serde::{Deserialize, Serialize};
use statrs::distribution::{Binomial, ContinuousCDF, DiscreteCDF, StudentsT};

/// Variance floor that keeps the t statistic finite for constant groups.
const VAR_EPS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroupStats {
    pub mean: f64,
    pub sd: f64,
    pub n: usize,
}

impl GroupStats {
    pub fn of(xs: &[f64]) -> GroupStats {
        let n = xs.len();
        let mean = xs.iter().sum::<f64>() / n.max(1) as f64;
        let var = if n > 1 { xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64 } else { 0.0 };
        GroupStats { mean, sd: var.sqrt(), n }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WelchTest {
    pub t: f64,
    pub df: f64,
    pub p_value: f64,
}

/// Two-sided Welch t-test of `a` against `b`; needs two values per group.
pub fn welch_t_test(a: &[f64], b: &[f64]) -> Option<WelchTest> {
    if a.len() < 2 || b.len() < 2 {
        return None;
    }
    let (ga, gb) = (GroupStats::of(a), GroupStats::of(b));
    let va = (ga.sd * ga.sd).max(VAR_EPS) / ga.n as f64;
    let vb = (gb.sd * gb.sd).max(VAR_EPS) / gb.n as f64;
    let t = (ga.mean - gb.mean) / (va + vb).sqrt();
    let df = (va + vb).powi(2) / (va * va / (ga.n - 1) as f64 + vb * vb / (gb.n - 1) as f64);
    let dist = StudentsT::new(0.0, 1.0, df).ok()?;
    let p_value = (2.0 * dist.cdf(-t.abs())).min(1.0);
    Some(WelchTest { t, df, p_value })
}

/// Two-sided exact binomial sign test; ties are dropped beforehand.
pub fn sign_test(positives: usize, negatives: usize) -> f64 {
    let n = positives + negatives;
    if n == 0 {
        return 1.0;
    }
    let k = positives.min(negatives) as u64;
    let b = Binomial::new(0.5, n as u64).expect("valid binomial");
    (2.0 * b.cdf(k)).min(1.0)
}

fn average_ranks(x: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..x.len()).collect();
    idx.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
    let mut ranks = vec![0.0; x.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && x[idx[j + 1]] == x[idx[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            ranks[k] = r;
        }
        i = j + 1;
    }
    ranks
}

/// Spearman rank correlation with average ranks for ties.
pub fn spearman(x: &[f64], y: &[f64]) -> f64 {
    assert_eq!(x.len(), y.len());
    let (rx, ry) = (average_ranks(x), average_ranks(y));
    let n = x.len() as f64;
    let (mx, my) = (rx.iter().sum::<f64>() / n, ry.iter().sum::<f64>() / n);
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in rx.iter().zip(&ry) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx).powi(2);
        syy += (b - my).powi(2);
    }
    if sxx == 0.0 || syy == 0.0 {
        return 0.0;
    }
    sxy / (sxx * syy).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_groups_give_strong_negative_t() {
        let w = welch_t_test(&[3.0, 3.0, 3.0], &[5.0, 5.0, 5.0]).unwrap();
        assert!(w.t < -1e5);
        assert!(w.p_value < 1e-6);
        assert!(welch_t_test(&[1.0], &[1.0, 2.0]).is_none());
    }

    #[test]
    fn welch_matches_hand_computation() {
        // a: mean 2, var 1; b: mean 4, var 17/6 (n = 3, 4)
        let a = [1.0, 2.0, 3.0];
        let b = [2.0, 3.5, 4.5, 6.0];
        let w = welch_t_test(&a, &b).unwrap();
        let vb = GroupStats::of(&b).sd.powi(2);
        let se = (1.0 / 3.0 + vb / 4.0_f64).sqrt();
        assert!((w.t - (2.0 - 4.0) / se).abs() < 1e-12);
        let df = (1.0 / 3.0 + vb / 4.0).powi(2) / ((1.0f64 / 3.0).powi(2) / 2.0 + (vb / 4.0).powi(2) / 3.0);
        assert!((w.df - df).abs() < 1e-12);
        assert!(w.p_value > 0.05 && w.p_value < 0.2);
    }

    #[test]
    fn sign_test_tail() {
        // P(X ≤ 0) for n = 64 is 2^-64
        assert!((sign_test(64, 0) - 2.0 * 0.5f64.powi(64)).abs() < 1e-25);
        assert_eq!(sign_test(0, 0), 1.0);
        assert_eq!(sign_test(5, 5), 1.0);
        // n = 10, k = 2: 2·(1 + 10 + 45)/1024
        assert!((sign_test(8, 2) - 2.0 * 56.0 / 1024.0).abs() < 1e-12);
    }

    #[test]
    fn spearman_examples() {
        let x = [1.0, 2.0, 3.0, 4.0];
        assert!((spearman(&x, &[10.0, 20.0, 30.0, 40.0]) - 1.0).abs() < 1e-12);
        assert!((spearman(&x, &[4.0, 3.0, 2.0, 1.0]) + 1.0).abs() < 1e-12);
        // tied y: ranks (1.5, 1.5, 3, 4)
        let r = spearman(&x, &[1.0, 1.0, 2.0, 3.0]);
        assert!((r - 0.9486832980505138).abs() < 1e-12);
    }
}
