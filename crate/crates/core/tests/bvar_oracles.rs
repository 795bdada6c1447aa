use disagreement::bvar::*;
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// Bivariate VAR(1) with intercept and correlated shocks, T = 500.
fn reference_data() -> DMatrix<f64> {
    let a = DMatrix::from_row_slice(2, 2, &[0.5, 0.1, 0.0, 0.3]);
    let c = DVector::from_vec(vec![0.2, 1.0]);
    let coeffs = VarCoefficients::new(vec![a], Some(c)).unwrap();
    let impact = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.3, 0.8]);
    simulate_var(&coeffs, &impact, 500, 42).unwrap()
}

fn spec1() -> VarSpec {
    VarSpec::new(1, true).unwrap()
}

#[test]
fn flat_prior_reproduces_least_squares() {
    let data = reference_data();
    for spec in [spec1(), VarSpec::new(2, true).unwrap(), VarSpec::new(1, false).unwrap()] {
        let ols = ols_var(&data, spec).unwrap();
        let hyper = MinnesotaHyper { lambda1: 1e6, ..MinnesotaHyper::from_data(&data).unwrap() };
        let post = minnesota_posterior(&data, spec, &hyper).unwrap();
        for (eq, density) in post.equations.iter().enumerate() {
            for (r, m) in density.mean.iter().enumerate() {
                let b = ols.stacked[(r, eq)];
                assert!((m - b).abs() <= 1e-6 * b.abs().max(1e-3), "eq {eq} reg {r}: {m} vs {b}");
            }
        }
    }
}

#[test]
fn dogmatic_prior_returns_prior_mean() {
    let data = reference_data();
    for delta in [0.0, 0.9] {
        let hyper = MinnesotaHyper { lambda1: 1e-8, delta, ..MinnesotaHyper::from_data(&data).unwrap() };
        let post = minnesota_posterior(&data, spec1(), &hyper).unwrap();
        let means = post.mean_coefficients();
        for i in 0..2 {
            for j in 0..2 {
                let prior = if i == j { delta } else { 0.0 };
                assert!((means.lags[0][(i, j)] - prior).abs() < 1e-6);
            }
            assert!(means.intercept.as_ref().unwrap()[i].abs() < 1e-6);
        }
    }
}

#[test]
fn single_equation_matches_generalized_ridge() {
    // One variable, one lag, intercept: two regressors.
    let a = DMatrix::from_element(1, 1, 0.6);
    let coeffs = VarCoefficients::new(vec![a], Some(DVector::from_element(1, 0.5))).unwrap();
    let data = simulate_var(&coeffs, &DMatrix::from_element(1, 1, 0.7), 120, 9).unwrap();
    let hyper = MinnesotaHyper { delta: 0.3, lambda1: 0.1, lambda4: 2.0, ..MinnesotaHyper::with_scales(vec![0.8]) };
    let post = minnesota_posterior(&data, spec1(), &hyper).unwrap();

    // Ridge form: (X'X + s2 W) b = X'y + s2 W b0, with W the prior precision.
    let t = data.nrows();
    let (mut sxx, mut sx1, mut s11, mut sy1, mut syx) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for i in 1..t {
        let (x, y) = (data[(i - 1, 0)], data[(i, 0)]);
        s11 += 1.0;
        sx1 += x;
        sxx += x * x;
        sy1 += y;
        syx += y * x;
    }
    let ybar = sy1 / s11;
    let xbar = sx1 / s11;
    let slope = (syx - s11 * xbar * ybar) / (sxx - s11 * xbar * xbar);
    let icpt = ybar - slope * xbar;
    let mut s2 = 0.0;
    for i in 1..t {
        let e = data[(i, 0)] - icpt - slope * data[(i - 1, 0)];
        s2 += e * e;
    }
    s2 /= s11;
    let w_c = 1.0 / (0.1_f64 * 2.0 * 0.8).powi(2);
    let w_a = 1.0 / 0.1_f64.powi(2);
    // [intercept, lag] ordering.
    let (m00, m01, m11) = (s11 + s2 * w_c, sx1, sxx + s2 * w_a);
    let (r0, r1) = (sy1, syx + s2 * w_a * 0.3);
    let det = m00 * m11 - m01 * m01;
    let b_c = (m11 * r0 - m01 * r1) / det;
    let b_a = (m00 * r1 - m01 * r0) / det;

    let mean = &post.equations[0].mean;
    assert!((mean[0] - b_c).abs() < 1e-10, "{} vs {b_c}", mean[0]);
    assert!((mean[1] - b_a).abs() < 1e-10, "{} vs {b_a}", mean[1]);
    // Posterior covariance is s2 times the inverse ridge matrix.
    let cov = &post.equations[0].covariance;
    assert!((cov[(1, 1)] - s2 * m00 / det).abs() < 1e-10);
    assert!((cov[(0, 1)] + s2 * m01 / det).abs() < 1e-10);
}

#[test]
fn posterior_covariances_are_symmetric_psd() {
    let data = reference_data();
    let post = minnesota_posterior(&data, VarSpec::new(3, true).unwrap(), &MinnesotaHyper::from_data(&data).unwrap()).unwrap();
    for eq in &post.equations {
        assert_eq!(eq.covariance, eq.covariance.transpose());
        assert!(eq.covariance.clone().symmetric_eigen().eigenvalues.min() >= 0.0);
    }
}

#[test]
fn invalid_hyper_rejected() {
    let data = reference_data();
    let hyper = MinnesotaHyper { lambda1: -1.0, ..MinnesotaHyper::from_data(&data).unwrap() };
    assert!(matches!(minnesota_posterior(&data, spec1(), &hyper), Err(VarError::InvalidHyper(_))));
}

fn random_matrix(rng: &mut ChaCha8Rng, n: usize) -> DMatrix<f64> {
    DMatrix::from_fn(n, n, |_, _| rng.sample::<f64, _>(StandardNormal))
}

#[test]
fn var1_responses_are_matrix_powers() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..50 {
        let mut a = random_matrix(&mut rng, 2) * 0.4;
        let coeffs0 = VarCoefficients::new(vec![a.clone()], None).unwrap();
        let r = spectral_radius(&coeffs0).unwrap();
        if r >= 0.95 {
            a *= 0.9 / r;
        }
        let coeffs = VarCoefficients::new(vec![a.clone()], None).unwrap();
        let g = random_matrix(&mut rng, 2);
        let sigma = &g * g.transpose() + DMatrix::identity(2, 2) * 0.1;
        let b0 = cholesky_impact(&sigma, &[0, 1]).unwrap();
        let irf = irf_point(&coeffs, &b0, 24).unwrap();
        let mut power = DMatrix::identity(2, 2);
        for h in 0..=24 {
            let expected = &power * &b0;
            assert!((&irf.responses[h] - expected).abs().max() < 1e-10);
            power = &a * power;
        }
    }
}

#[test]
fn cholesky_reconstructs_random_spd() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for trial in 0..100 {
        let n = 2 + trial % 4;
        let g = random_matrix(&mut rng, n);
        let sigma = &g * g.transpose() + DMatrix::identity(n, n) * 0.05;
        let mut ordering: Vec<usize> = (0..n).collect();
        ordering.rotate_left(trial % n);
        let b0 = cholesky_impact(&sigma, &ordering).unwrap();
        let permuted = DMatrix::from_fn(n, n, |i, j| sigma[(ordering[i], ordering[j])]);
        assert!((&b0 * b0.transpose() - permuted).abs().max() < 1e-10);
        assert!((0..n).all(|i| (i + 1..n).all(|j| b0[(i, j)] == 0.0)));
        assert!((b0[(0, 0)] - sigma[(ordering[0], ordering[0])].sqrt()).abs() < 1e-12);
    }
}

#[test]
fn first_variable_impact_independent_of_second() {
    let sigma = DMatrix::from_row_slice(3, 3, &[2.0, 0.3, -0.4, 0.3, 1.5, 0.2, -0.4, 0.2, 1.0]);
    let a = cholesky_impact(&sigma, &[0, 1, 2]).unwrap();
    let b = cholesky_impact(&sigma, &[0, 2, 1]).unwrap();
    assert!((a[(0, 0)] - 2.0_f64.sqrt()).abs() < 1e-15);
    assert_eq!(a[(0, 0)], b[(0, 0)]);
}

/// Power iteration on the companion matrix; valid when the dominant eigenvalue is real and simple.
fn power_iteration_radius(c: &DMatrix<f64>) -> f64 {
    let mut v = DVector::from_element(c.nrows(), 1.0);
    let mut lambda = 0.0;
    for _ in 0..10_000 {
        let w = c * &v;
        let norm = w.norm();
        if norm == 0.0 {
            return 0.0;
        }
        let next = norm / v.norm();
        v = w / norm;
        if (next - lambda).abs() < 1e-13 {
            return next;
        }
        lambda = next;
    }
    lambda
}

#[test]
fn spectral_radius_agrees_with_power_iteration() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut checked = 0;
    while checked < 30 {
        // Positive matrices have a real, simple dominant eigenvalue.
        let a1 = DMatrix::from_fn(2, 2, |_, _| rng.random::<f64>() * 0.4);
        let a2 = DMatrix::from_fn(2, 2, |_, _| rng.random::<f64>() * 0.2);
        let coeffs = VarCoefficients::new(vec![a1, a2], None).unwrap();
        let oracle = power_iteration_radius(&coeffs.companion());
        assert!((spectral_radius(&coeffs).unwrap() - oracle).abs() < 1e-8);
        checked += 1;
    }
}

#[test]
fn stable_responses_decay() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for _ in 0..100 {
        let a1 = random_matrix(&mut rng, 2) * 0.3;
        let a2 = random_matrix(&mut rng, 2) * 0.2;
        let mut coeffs = VarCoefficients::new(vec![a1, a2], None).unwrap();
        let r = spectral_radius(&coeffs).unwrap();
        if r > 0.9 {
            let s = 0.9 / r;
            coeffs.lags[0] *= s;
            coeffs.lags[1] *= s * s;
        }
        assert!(spectral_radius(&coeffs).unwrap() <= 0.9 + 1e-12);
        let irf = irf_point(&coeffs, &DMatrix::identity(2, 2), 24).unwrap();
        let peak = |range: std::ops::RangeInclusive<usize>| {
            range.map(|h| irf.responses[h].abs().max()).fold(0.0, f64::max)
        };
        assert!(peak(19..=24) < peak(0..=5));
    }
}

#[test]
fn hc0_close_to_classical_under_homoscedasticity() {
    let a = DMatrix::from_row_slice(2, 2, &[0.5, 0.1, 0.0, 0.3]);
    let coeffs = VarCoefficients::new(vec![a], Some(DVector::from_vec(vec![0.1, -0.2]))).unwrap();
    let data = simulate_var(&coeffs, &DMatrix::identity(2, 2), 5000, 21).unwrap();
    let est = ols_var(&data, spec1()).unwrap();
    let robust = hc_se(&est).unwrap();
    let classical = classical_se(&est).unwrap();
    for (r, c) in robust.iter().zip(&classical) {
        for (x, y) in r.iter().zip(c.iter()) {
            assert!((x / y - 1.0).abs() < 0.10, "{x} vs {y}");
        }
    }
}

#[test]
fn hc0_zero_residuals_give_zero_errors() {
    let data = reference_data();
    let mut est = ols_var(&data, spec1()).unwrap();
    est.residuals.fill(0.0);
    for se in hc_se(&est).unwrap() {
        assert!(se.iter().all(|v| *v == 0.0));
    }
}

#[test]
fn intercept_absorbs_level_shifts() {
    let data = reference_data();
    let mut shifted = data.clone();
    shifted.column_mut(0).add_scalar_mut(5.0);
    shifted.column_mut(1).add_scalar_mut(-3.0);
    for spec in [spec1(), VarSpec::new(3, true).unwrap()] {
        let a = ols_var(&data, spec).unwrap();
        let b = ols_var(&shifted, spec).unwrap();
        for (x, y) in a.coefficients.lags.iter().zip(&b.coefficients.lags) {
            assert!((x - y).abs().max() < 1e-8);
        }
        assert!((&a.sigma - &b.sigma).abs().max() < 1e-8);
    }
}

fn posterior_with(lambda1: f64) -> MinnesotaPosterior {
    let data = reference_data();
    let hyper = MinnesotaHyper { lambda1, ..MinnesotaHyper::from_data(&data).unwrap() };
    minnesota_posterior(&data, spec1(), &hyper).unwrap()
}

fn mean_width(bundle: &IrfBundle) -> f64 {
    let mut total = 0.0;
    let mut count = 0.0;
    for (lo, hi) in bundle.lower.responses.iter().zip(&bundle.upper.responses) {
        total += (hi - lo).sum();
        count += lo.len() as f64;
    }
    total / count
}

#[test]
fn point_response_inside_band() {
    let post = posterior_with(0.2);
    let settings = BandSettings { draws: 10_000, ..BandSettings::new(2, 24, 99) };
    let bundle = irf_bands(&post, &settings).unwrap();
    for h in 0..=24 {
        let (lo, pt, hi) = (&bundle.lower.responses[h], &bundle.point.responses[h], &bundle.upper.responses[h]);
        for k in 0..4 {
            assert!(lo[k] <= pt[k] && pt[k] <= hi[k], "h {h} entry {k}: {} {} {}", lo[k], pt[k], hi[k]);
        }
    }
    let b0 = cholesky_impact(&post.sigma, &[0, 1]).unwrap();
    assert_eq!(bundle.point.responses[0], b0);
    assert_eq!(bundle.rejected_explosive, 0);
}

#[test]
fn bands_tighten_with_prior() {
    let widths: Vec<f64> = [0.5, 0.2, 0.05]
        .iter()
        .map(|&l| mean_width(&irf_bands(&posterior_with(l), &BandSettings::new(2, 24, 3)).unwrap()))
        .collect();
    assert!(widths[0] >= widths[1] && widths[1] >= widths[2], "{widths:?}");
}

#[test]
fn degenerate_posterior_collapses_bands() {
    let mut post = posterior_with(0.2);
    for eq in post.equations.iter_mut() {
        eq.covariance.fill(0.0);
    }
    let bundle = irf_bands(&post, &BandSettings::new(2, 24, 4)).unwrap();
    assert_eq!(bundle.lower, bundle.point);
    assert_eq!(bundle.upper, bundle.point);
}

#[test]
fn bands_are_reproducible_and_schedule_independent() {
    let post = posterior_with(0.2);
    let settings = BandSettings::new(2, 24, 11);
    let a = irf_bands(&post, &settings).unwrap();
    let b = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap().install(|| irf_bands(&post, &settings).unwrap());
    assert_eq!(a, b);
    let c = irf_bands(&post, &BandSettings { seed: 12, ..settings }).unwrap();
    assert_ne!(a.lower, c.lower);
}

#[test]
fn explosive_posterior_exhausts_budget_or_counts_rejections() {
    // Near-unit-root data with a loose prior produces explosive draws.
    let a = DMatrix::from_row_slice(2, 2, &[0.995, 0.0, 0.0, 0.3]);
    let coeffs = VarCoefficients::new(vec![a], None).unwrap();
    let data = simulate_var(&coeffs, &DMatrix::identity(2, 2), 60, 13).unwrap();
    let hyper = MinnesotaHyper { lambda1: 5.0, ..MinnesotaHyper::from_data(&data).unwrap() };
    let post = minnesota_posterior(&data, spec1(), &hyper).unwrap();
    let settings = BandSettings::new(2, 24, 14);
    match irf_bands(&post, &settings) {
        Ok(bundle) => assert!(bundle.rejected_explosive > 0),
        Err(VarError::BudgetExhausted { .. }) => {}
        Err(e) => panic!("unexpected error {e}"),
    }
    let kept = irf_bands(&post, &BandSettings { stability: StabilityRule::Keep, ..settings }).unwrap();
    assert_eq!(kept.rejected_explosive, 0);
}

#[test]
fn strong_second_lag_is_selected() {
    let a1 = DMatrix::from_row_slice(2, 2, &[0.4, 0.1, 0.1, 0.3]);
    let a2 = DMatrix::from_row_slice(2, 2, &[-0.5, 0.0, 0.0, -0.4]);
    let coeffs = VarCoefficients::new(vec![a1, a2], None).unwrap();
    let hits = (0..20)
        .filter(|s| {
            let data = simulate_var(&coeffs, &DMatrix::identity(2, 2), 400, 1000 + s).unwrap();
            bic_select(&data, 6, true).unwrap().lags == 2
        })
        .count();
    assert!(hits >= 17, "{hits}/20");
}
