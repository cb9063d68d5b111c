//! Sigmoid calibration P(y=1 | f) = 1 / (1 + exp(A·f + B)), fitted by Newton's
//! method with backtracking on the regularized cross-entropy.

use serde::{Deserialize, Serialize};

use super::SvmError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlattParams {
    pub a: f64,
    pub b: f64,
}

/// Probability for decision value `f`, clamped so it never reaches 0 or 1.
pub fn sigmoid_proba(p: PlattParams, f: f64) -> f64 {
    let z = p.a * f + p.b;
    let q = if z >= 0.0 {
        let e = (-z).exp();
        e / (1.0 + e)
    } else {
        1.0 / (1.0 + z.exp())
    };
    q.clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON / 2.0)
}

pub fn fit_sigmoid(dec: &[f64], labels: &[bool]) -> Result<PlattParams, SvmError> {
    assert_eq!(dec.len(), labels.len());
    let prior1 = labels.iter().filter(|&&l| l).count() as f64;
    let prior0 = labels.len() as f64 - prior1;
    if prior1 == 0.0 || prior0 == 0.0 {
        return Err(SvmError::DegenerateData("calibration set holds a single class".into()));
    }
    let hi = (prior1 + 1.0) / (prior1 + 2.0);
    let lo = 1.0 / (prior0 + 2.0);
    let t: Vec<f64> = labels.iter().map(|&l| if l { hi } else { lo }).collect();

    let objective = |a: f64, b: f64| -> f64 {
        dec.iter()
            .zip(&t)
            .map(|(&f, &ti)| {
                let z = f * a + b;
                if z >= 0.0 {
                    ti * z + (-z).exp().ln_1p()
                } else {
                    (ti - 1.0) * z + z.exp().ln_1p()
                }
            })
            .sum()
    };

    const MAX_ITER: usize = 100;
    const MIN_STEP: f64 = 1e-10;
    const SIGMA: f64 = 1e-12;
    let (mut a, mut b) = (0.0, ((prior0 + 1.0) / (prior1 + 1.0)).ln());
    let mut fval = objective(a, b);
    for _ in 0..MAX_ITER {
        let (mut h11, mut h22, mut h21, mut g1, mut g2) = (SIGMA, SIGMA, 0.0, 0.0, 0.0);
        for (&f, &ti) in dec.iter().zip(&t) {
            let z = f * a + b;
            let (p, q) = if z >= 0.0 {
                let e = (-z).exp();
                (e / (1.0 + e), 1.0 / (1.0 + e))
            } else {
                let e = z.exp();
                (1.0 / (1.0 + e), e / (1.0 + e))
            };
            let d2 = p * q;
            h11 += f * f * d2;
            h22 += d2;
            h21 += f * d2;
            let d1 = ti - p;
            g1 += f * d1;
            g2 += d1;
        }
        if g1.abs() < 1e-5 && g2.abs() < 1e-5 {
            break;
        }
        let det = h11 * h22 - h21 * h21;
        let da = -(h22 * g1 - h21 * g2) / det;
        let db = -(-h21 * g1 + h11 * g2) / det;
        let gd = g1 * da + g2 * db;
        let mut step = 1.0;
        while step >= MIN_STEP {
            let (na, nb) = (a + step * da, b + step * db);
            let nf = objective(na, nb);
            if nf < fval + 1e-4 * step * gd {
                a = na;
                b = nb;
                fval = nf;
                break;
            }
            step /= 2.0;
        }
        if step < MIN_STEP {
            log::debug!("platt: line search failed");
            break;
        }
    }
    Ok(PlattParams { a, b })
}

#[cfg(test)]
mod tests {
    use super::*;

    const P: PlattParams = PlattParams { a: -1.0, b: 0.0 };

    #[test]
    fn midpoint_and_bounds() {
        assert_eq!(sigmoid_proba(P, 0.0), 0.5);
        let hi = sigmoid_proba(P, 50.0);
        assert!((1.0 - 1e-9..1.0).contains(&hi));
        let lo = sigmoid_proba(P, -800.0);
        assert!(lo > 0.0);
        assert!(sigmoid_proba(P, 1.0) > sigmoid_proba(P, 0.9));
    }

    #[test]
    fn separated_holdout_gives_negative_slope() {
        let dec: Vec<f64> = (0..40).map(|i| i as f64 / 10.0 - 2.0).collect();
        let labels: Vec<bool> = dec.iter().map(|&f| f > 0.0).collect();
        let p = fit_sigmoid(&dec, &labels).unwrap();
        assert!(p.a < 0.0);
        let probs: Vec<f64> = dec.iter().map(|&f| sigmoid_proba(p, f)).collect();
        assert!(probs.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn matches_logistic_fit_on_overlapping_classes() {
        // overlapping classes: the regularized MLE has a finite optimum where the
        // gradient of the objective vanishes; check it numerically
        let dec: Vec<f64> = (0..200).map(|i| ((i * 37) % 200) as f64 / 50.0 - 2.0).collect();
        let labels: Vec<bool> = dec.iter().enumerate().map(|(i, &f)| f + ((i * 13) % 7) as f64 / 3.0 - 1.0 > 0.0).collect();
        let p = fit_sigmoid(&dec, &labels).unwrap();
        let n1 = labels.iter().filter(|&&l| l).count() as f64;
        let n0 = labels.len() as f64 - n1;
        let (hi, lo) = ((n1 + 1.0) / (n1 + 2.0), 1.0 / (n0 + 2.0));
        let (mut ga, mut gb) = (0.0, 0.0);
        for (&f, &l) in dec.iter().zip(&labels) {
            let t = if l { hi } else { lo };
            let q = 1.0 / (1.0 + (p.a * f + p.b).exp());
            ga += (t - q) * f;
            gb += t - q;
        }
        assert!(ga.abs() < 1e-4 && gb.abs() < 1e-4, "{ga} {gb}");
    }

    #[test]
    fn single_class_rejected() {
        assert!(fit_sigmoid(&[1.0, 2.0], &[true, true]).is_err());
    }
}
