use gazeintent::eval::{duration_stats_from, sign_test, spearman, welch_t_test};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

#[test]
fn welch_rarely_rejects_identical_distributions() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let d = Normal::new(4.0, 1.35).unwrap();
    let kept = (0..100)
        .filter(|_| {
            let a: Vec<f64> = (0..200).map(|_| d.sample(&mut rng)).collect();
            let b: Vec<f64> = (0..200).map(|_| d.sample(&mut rng)).collect();
            duration_stats_from(&a, &b).unwrap().p_value > 0.05
        })
        .count();
    assert!(kept >= 90, "{kept}/100");
}

#[test]
fn welch_detects_a_one_second_shift() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let a: Vec<f64> = (0..200).map(|_| Normal::new(3.61, 1.36).unwrap().sample(&mut rng)).collect();
    let b: Vec<f64> = (0..200).map(|_| Normal::new(4.65, 1.34).unwrap().sample(&mut rng)).collect();
    let w = welch_t_test(&a, &b).unwrap();
    assert!(w.t < 0.0 && w.p_value < 1e-6);
}

#[test]
fn welch_against_textbook_values() {
    // x = 1..5, y = 3..9 step 1.5: means 3 and 6, variances 2.5 and 5.625
    let x = [1.0, 2.0, 3.0, 4.0, 5.0];
    let y = [3.0, 4.5, 6.0, 7.5, 9.0];
    let w = welch_t_test(&x, &y).unwrap();
    let se = (2.5f64 / 5.0 + 5.625 / 5.0).sqrt();
    assert!((w.t - (-3.0 / se)).abs() < 1e-12);
    let num = (2.5f64 / 5.0 + 5.625 / 5.0).powi(2);
    let den = (2.5f64 / 5.0).powi(2) / 4.0 + (5.625f64 / 5.0).powi(2) / 4.0;
    assert!((w.df - num / den).abs() < 1e-12);
}

#[test]
fn sign_test_small_cases() {
    // 6 of 6 in one direction: 2 · 0.5⁶
    assert!((sign_test(6, 0) - 0.03125).abs() < 1e-12);
    assert!((sign_test(3, 3) - 1.0).abs() < 1e-12);
}

#[test]
fn spearman_is_rank_based() {
    let x = [1.0, 2.0, 3.0, 4.0];
    assert!((spearman(&x, &[1.0, 8.0, 27.0, 64.0]) - 1.0).abs() < 1e-12);
    assert!((spearman(&x, &[4.0, 3.0, 2.0, 1.0]) + 1.0).abs() < 1e-12);
}
