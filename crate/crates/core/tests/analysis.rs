use nalgebra::{DMatrix, DVector};
use nirsim_core::analysis::{
    horner, linear_fit, log_linear_fit, polyfit, t_test_two_tailed, window_mean, SampleSeries,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use statrs::distribution::{ContinuousCDF, StudentsT};

/// Pooled two-sample t statistic and its two-tailed p-value from statrs.
fn reference_t_test(a: &[f64], b: &[f64]) -> (f64, f64) {
    let mean = |x: &[f64]| x.iter().sum::<f64>() / x.len() as f64;
    let ss = |x: &[f64], m: f64| x.iter().map(|v| (v - m).powi(2)).sum::<f64>();
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (ma, mb) = (mean(a), mean(b));
    let df = na + nb - 2.0;
    let sp2 = (ss(a, ma) + ss(b, mb)) / df;
    let t = (ma - mb) / (sp2 * (1.0 / na + 1.0 / nb)).sqrt();
    let dist = StudentsT::new(0.0, 1.0, df).unwrap();
    (t, 2.0 * dist.sf(t.abs()))
}

/// Least squares through an SVD of the full Vandermonde matrix.
fn reference_polyfit(xs: &[f64], ys: &[f64], order: usize) -> Vec<f64> {
    let a = DMatrix::from_fn(xs.len(), order + 1, |i, j| xs[i].powi(j as i32));
    let b = DVector::from_column_slice(ys);
    a.svd(true, true)
        .solve(&b, 1e-14)
        .unwrap()
        .iter()
        .copied()
        .collect()
}

#[test]
fn t_test_agrees_with_statrs_on_random_cases() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for case in 0..100 {
        let na = rng.gen_range(2..40);
        let nb = rng.gen_range(2..40);
        let shift = rng.gen_range(-2.0..2.0);
        let scale = rng.gen_range(0.1..10.0);
        let n = Normal::new(0.0, scale).unwrap();
        let a: Vec<f64> = (0..na).map(|_| n.sample(&mut rng)).collect();
        let b: Vec<f64> = (0..nb)
            .map(|_| n.sample(&mut rng) + shift * scale)
            .collect();
        let got = t_test_two_tailed(&a, &b).unwrap();
        let (t, p) = reference_t_test(&a, &b);
        assert!(
            (got.t_statistic - t).abs() <= 1e-6 * t.abs().max(1.0),
            "case {case}"
        );
        assert!(
            (got.p_value - p).abs() <= 1e-6 * p.max(1e-300).max(1e-6),
            "case {case}: {} vs {p}",
            got.p_value
        );
        assert_eq!(got.degrees_of_freedom, (na + nb - 2) as f64);
    }
}

#[test]
fn polyfit_agrees_with_svd_least_squares_on_random_cases() {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    for case in 0..100 {
        let order = rng.gen_range(1..=5);
        let n = rng.gen_range(order + 2..60);
        let xs: Vec<f64> = (0..n)
            .map(|i| -2.0 + 4.0 * i as f64 / (n - 1) as f64 + rng.gen_range(-0.01..0.01))
            .collect();
        let truth: Vec<f64> = (0..=order).map(|_| rng.gen_range(-3.0..3.0)).collect();
        let ys: Vec<f64> = xs
            .iter()
            .map(|&x| horner(&truth, x) + rng.gen_range(-0.5..0.5))
            .collect();
        let got = polyfit(&xs, &ys, order).unwrap();
        let want = reference_polyfit(&xs, &ys, order);
        for (g, w) in got.coefficients.iter().zip(&want) {
            assert!(
                (g - w).abs() <= 1e-6 * w.abs().max(1.0),
                "case {case}: {g} vs {w}"
            );
        }
    }
}

#[test]
fn noisy_quintic_matches_reference() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let truth = [0.5, -1.0, 0.25, 0.8, -0.3, 0.05];
    let noise = Normal::new(0.0, 0.1).unwrap();
    let xs: Vec<f64> = (0..500).map(|i| -3.0 + 6.0 * i as f64 / 499.0).collect();
    let ys: Vec<f64> = xs
        .iter()
        .map(|&x| horner(&truth, x) + noise.sample(&mut rng))
        .collect();
    let got = polyfit(&xs, &ys, 5).unwrap();
    let want = reference_polyfit(&xs, &ys, 5);
    for (g, w) in got.coefficients.iter().zip(&want) {
        assert!(((g - w) / w).abs() < 1e-6, "{g} vs {w}");
    }
}

#[test]
fn sixty_second_window_mean_within_three_sigma() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let noise = Normal::new(0.0, 0.01).unwrap();
    let samples: Vec<(f64, f64)> = (0..60)
        .map(|i| (i as f64, 0.035 + noise.sample(&mut rng)))
        .collect();
    let s = SampleSeries::new(1, "empty", samples).unwrap();
    let m = window_mean(&s, 0.0, 59.0).unwrap();
    assert!((m - 0.035).abs() < 3.0 * 0.01 / 60f64.sqrt());
}

#[test]
fn log_linear_slope_of_exponential_decay() {
    let xs = [4.0, 4.5, 5.7, 7.2, 8.9, 10.8, 12.6, 14.6];
    let ys: Vec<f64> = xs
        .iter()
        .map(|x| 0.05 * (-1.1f64 * x).exp() * (1.0 + 0.01 * x.sin()))
        .collect();
    let fit = log_linear_fit(&xs, &ys).unwrap();
    assert!((fit.slope + 1.1).abs() < 0.01);
    assert!(fit.p_value < 1e-6);
    assert!(log_linear_fit(&xs, &[1.0, 0.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0]).is_err());
    let flat = linear_fit(&[1.0, 2.0, 3.0, 4.0], &[1.0, 1.1, 0.9, 1.0]).unwrap();
    assert!(flat.p_value > 0.5);
}

fn samples() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-100.0f64..100.0, 2..30)
}

proptest! {
    #[test]
    fn t_test_is_antisymmetric(a in samples(), b in samples()) {
        let (Ok(ab), Ok(ba)) = (t_test_two_tailed(&a, &b), t_test_two_tailed(&b, &a)) else {
            return Ok(());
        };
        prop_assert!((ab.t_statistic + ba.t_statistic).abs() <= 1e-9 * ab.t_statistic.abs().max(1.0));
        prop_assert!((ab.p_value - ba.p_value).abs() <= 1e-12);
        prop_assert!((0.0..=1.0).contains(&ab.p_value));
    }

    #[test]
    fn t_test_is_affine_invariant(a in samples(), b in samples(), k in 0.01f64..100.0, c in -1e3f64..1e3) {
        let Ok(base) = t_test_two_tailed(&a, &b) else { return Ok(()); };
        let tr = |x: &[f64]| x.iter().map(|v| k * v + c).collect::<Vec<_>>();
        let moved = t_test_two_tailed(&tr(&a), &tr(&b)).unwrap();
        prop_assert!((moved.t_statistic - base.t_statistic).abs() <= 1e-6 * base.t_statistic.abs().max(1.0));
        prop_assert!((moved.p_value - base.p_value).abs() <= 1e-6);
    }

    #[test]
    fn polyfit_reproduces_exact_polynomials(coefs in prop::collection::vec(-5.0f64..5.0, 1..6)) {
        let order = coefs.len() - 1;
        let xs: Vec<f64> = (0..25).map(|i| i as f64 * 0.2 - 2.0).collect();
        let ys: Vec<f64> = xs.iter().map(|&x| horner(&coefs, x)).collect();
        let fit = polyfit(&xs, &ys, order).unwrap();
        for (g, w) in fit.coefficients.iter().zip(&coefs) {
            prop_assert!((g - w).abs() < 1e-8);
        }
        prop_assert!(fit.rms_residual < 1e-8);
    }
}
