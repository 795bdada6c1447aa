//! Acceptance suite: runs each criterion and prints one PASS/FAIL line per criterion.
//!
//! Built with `harness = false` so the lines always reach the terminal; the
//! process exits nonzero when any criterion fails.

mod common;

use std::panic::AssertUnwindSafe;
use std::time::Instant;

use disagreement::bvar::*;
use disagreement::indicators::{discrepancy, disp, indicator_series, Metric};
use disagreement::ingest::{renormalize, ShareSimulation, ShareVector};
use disagreement::stats::pearson;
use disagreement_cli::pipeline::{self, MANIFEST};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};

type Outcome = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        if !$cond {
            return Err(format!($($msg)+));
        }
    };
}

fn sv(v: &[f64]) -> ShareVector {
    ShareVector::new(v.to_vec()).unwrap()
}

fn flat_dirichlet(seed: u64, count: usize, n: usize) -> Vec<ShareVector> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let gamma = Gamma::new(1.0, 1.0).unwrap();
    (0..count)
        .map(|_| {
            let g: Vec<f64> = (0..n).map(|_| gamma.sample(&mut rng)).collect();
            let total: f64 = g.iter().sum();
            renormalize(&g.iter().map(|x| x / total).collect::<Vec<_>>(), 1e-9).unwrap()
        })
        .collect()
}

/// The three-category discrepancy written out term by term.
fn literal_three_category(p: f64, e: f64, m: f64) -> f64 {
    let third = 1.0 / 3.0;
    1.0 - ((p - third).powi(2) + (e - third).powi(2) + (m - third).powi(2)).sqrt() / (2.0_f64 / 3.0).sqrt()
}

fn indicator_exactness() -> Outcome {
    let start = Instant::now();
    let close = |a: f64, b: f64| (a - b).abs() < 1e-12;
    ensure!(close(disp(&sv(&[0.5, 0.0, 0.5])).unwrap(), 1.0), "disp polarized");
    ensure!(close(disp(&sv(&[1.0, 0.0, 0.0])).unwrap(), 0.0), "disp unanimous");
    ensure!(close(disp(&sv(&[0.2, 0.7, 0.1])).unwrap(), 0.29_f64.sqrt()), "disp (0.2, 0.7, 0.1)");
    let third = 1.0 / 3.0;
    ensure!(close(discrepancy(&sv(&[third, third, third])).unwrap(), 1.0), "D barycenter");
    ensure!(close(discrepancy(&sv(&[1.0, 0.0, 0.0])).unwrap(), 0.0), "D vertex");
    ensure!(close(discrepancy(&sv(&[0.5, 0.5, 0.0])).unwrap(), 0.5), "D (0.5, 0.5, 0)");
    ensure!(close(discrepancy(&sv(&[0.2; 5])).unwrap(), 1.0), "D five-category barycenter");
    for v in [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]] {
        ensure!(discrepancy(&sv(&v)).unwrap() == 0.0, "vertex {v:?}");
    }

    const PERMS: [[usize; 3]; 6] = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];
    let draws = flat_dirichlet(1, 10_000, 3);
    for s in &draws {
        let v = s.values();
        let d = discrepancy(s).unwrap();
        ensure!(d > 0.0 && d < 1.0, "interior draw {v:?} gave D = {d}");
        for p in PERMS {
            let permuted = discrepancy(&sv(&[v[p[0]], v[p[1]], v[p[2]]])).unwrap();
            ensure!((permuted - d).abs() < 1e-12, "D not permutation invariant at {v:?}");
        }
        let x = disp(s).unwrap();
        ensure!((0.0..=1.0).contains(&x), "DISP {x} out of range at {v:?}");
    }
    let elapsed = start.elapsed().as_secs_f64();
    ensure!(elapsed < 1.0, "took {elapsed:.3} s");
    Ok(format!("7 examples, 10000 draws, {elapsed:.3} s"))
}

fn dual_coding() -> Outcome {
    let mut worst = 0.0_f64;
    for s in flat_dirichlet(2, 10_000, 3) {
        let v = s.values();
        worst = worst.max((discrepancy(&s).unwrap() - literal_three_category(v[0], v[1], v[2])).abs());
    }
    ensure!(worst <= 1e-12, "max difference {worst:e}");
    Ok(format!("max difference {worst:e} over 10000 compositions"))
}

fn disp_versus_d() -> Outcome {
    let mut sim = ShareSimulation::new(2024, 2000, 3, 0.8, 200.0);
    sim.latent_sd = 0.5;
    sim.center = Some(vec![0.25, 0.55, 0.20]);
    let panel = sim.run().unwrap().panel;
    let d = indicator_series(&panel, Metric::D).unwrap();
    let s = indicator_series(&panel, Metric::Disp).unwrap();
    let r = pearson(&d.series.values, &s.series.values).unwrap();
    // Thresholds frozen from the oracle runs: corr 0.9575, means 0.542 vs 0.690.
    ensure!(r > 0.9, "corr(D, DISP) = {r}");
    let draws = flat_dirichlet(4, 10_000, 3);
    let md = draws.iter().map(|s| discrepancy(s).unwrap()).sum::<f64>() / 10_000.0;
    let ms = draws.iter().map(|s| disp(s).unwrap()).sum::<f64>() / 10_000.0;
    ensure!(ms - md > 0.1, "mean DISP {ms} vs mean D {md}");
    Ok(format!("corr {r:.4} > 0.9; mean DISP {ms:.3} > mean D {md:.3} + 0.1"))
}

/// Bivariate VAR(1) with intercept and correlated shocks, T = 500.
fn reference_data() -> DMatrix<f64> {
    let a = DMatrix::from_row_slice(2, 2, &[0.5, 0.1, 0.0, 0.3]);
    let c = DVector::from_vec(vec![0.2, 1.0]);
    let coeffs = VarCoefficients::new(vec![a], Some(c)).unwrap();
    let impact = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.3, 0.8]);
    simulate_var(&coeffs, &impact, 500, 42).unwrap()
}

fn prior_limits() -> Outcome {
    let data = reference_data();
    let spec = VarSpec::new(1, true).unwrap();
    let ols = ols_var(&data, spec).unwrap();
    let flat = MinnesotaHyper { lambda1: 1e6, ..MinnesotaHyper::from_data(&data).unwrap() };
    let post = minnesota_posterior(&data, spec, &flat).unwrap();
    let mut worst_rel = 0.0_f64;
    for (eq, density) in post.equations.iter().enumerate() {
        for (r, m) in density.mean.iter().enumerate() {
            let b = ols.stacked[(r, eq)];
            worst_rel = worst_rel.max((m - b).abs() / b.abs().max(1e-3));
        }
    }
    ensure!(worst_rel <= 1e-6, "flat prior off OLS by {worst_rel:e} relative");

    let tight = MinnesotaHyper { lambda1: 1e-8, ..flat };
    let means = minnesota_posterior(&data, spec, &tight).unwrap().mean_coefficients();
    let worst_abs = means.lags[0].abs().max().max(means.intercept.unwrap().abs().max());
    ensure!(worst_abs <= 1e-6, "dogmatic prior off its mean by {worst_abs:e}");
    Ok(format!("flat {worst_rel:.1e} relative, dogmatic {worst_abs:.1e}"))
}

fn analytic_irf() -> Outcome {
    let a = DMatrix::from_row_slice(2, 2, &[0.5, 0.0, 0.2, 0.3]);
    let coeffs = VarCoefficients::new(vec![a.clone()], None).unwrap();
    let b0 = cholesky_impact(&DMatrix::identity(2, 2), &[0, 1]).unwrap();
    let irf = irf_point(&coeffs, &b0, 24).unwrap();
    let hand = [(1.0, 0.0), (0.5, 0.2), (0.25, 0.16)];
    for (h, (r0, r1)) in hand.iter().enumerate() {
        let got = (irf.get(0, 0, h), irf.get(1, 0, h));
        ensure!((got.0 - r0).abs() < 1e-10 && (got.1 - r1).abs() < 1e-10, "h {h}: {got:?}");
    }
    let mut power = DMatrix::identity(2, 2);
    let mut worst = 0.0_f64;
    for h in 0..=24 {
        worst = worst.max((&irf.responses[h] - &power * &b0).abs().max());
        power = &a * power;
    }
    ensure!(worst < 1e-10, "matrix-power mismatch {worst:e}");
    Ok(format!("hand values h = 0..2, A^h B0 to h = 24 within {worst:.1e}"))
}

fn cholesky_contract() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let mut worst = 0.0_f64;
    for i in 0..100 {
        let n = 2 + i % 4;
        let g = DMatrix::from_fn(n, n, |_, _| rng.sample::<f64, _>(StandardNormal));
        let sigma = &g * g.transpose() + DMatrix::identity(n, n) * 0.05;
        let mut ordering: Vec<usize> = (0..n).collect();
        ordering.rotate_left(i % n);
        let b0 = cholesky_impact(&sigma, &ordering).unwrap();
        let permuted = DMatrix::from_fn(n, n, |r, c| sigma[(ordering[r], ordering[c])]);
        worst = worst.max((&b0 * b0.transpose() - permuted).abs().max());
        ensure!(b0.upper_triangle() == DMatrix::from_diagonal(&b0.diagonal()), "factor not lower triangular");
    }
    ensure!(worst < 1e-10, "reconstruction error {worst:e}");
    let bad = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
    match cholesky_impact(&bad, &[0, 1]) {
        Err(e @ VarError::NotPositiveDefinite { .. }) => ensure!(e.to_string().contains("not positive-definite"), "{e}"),
        other => return Err(format!("indefinite matrix accepted: {other:?}")),
    }
    Ok(format!("100 matrices within {worst:.1e}; indefinite input rejected"))
}

fn bic_recovery() -> Outcome {
    let start = Instant::now();
    let a1 = DMatrix::from_row_slice(2, 2, &[0.4, 0.1, 0.1, 0.3]);
    let a2 = DMatrix::from_row_slice(2, 2, &[-0.5, 0.0, 0.0, -0.4]);
    let two = VarCoefficients::new(vec![a1, a2], None).unwrap();
    let white = VarCoefficients::new(vec![DMatrix::zeros(2, 2)], None).unwrap();
    let eye = DMatrix::identity(2, 2);
    let hits = |coeffs: &VarCoefficients, t: usize, seed0: u64, want: usize| {
        (0..100)
            .filter(|s| {
                let data = simulate_var(coeffs, &eye, t, seed0 + s).unwrap();
                bic_select(&data, 12, true).unwrap().lags == want
            })
            .count()
    };
    let var2 = hits(&two, 400, 1000, 2);
    let noise = hits(&white, 500, 5000, 1);
    let elapsed = start.elapsed().as_secs_f64();
    ensure!(var2 >= 85, "VAR(2) recovered in {var2}/100");
    ensure!(noise >= 90, "white noise gave p = 1 in {noise}/100");
    ensure!(elapsed < 30.0, "took {elapsed:.1} s");
    Ok(format!("VAR(2) {var2}/100, white noise {noise}/100, {elapsed:.1} s"))
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

fn band_sanity() -> Outcome {
    let data = reference_data();
    let spec = VarSpec::new(1, true).unwrap();
    let posterior = |lambda1| {
        let hyper = MinnesotaHyper { lambda1, ..MinnesotaHyper::from_data(&data).unwrap() };
        minnesota_posterior(&data, spec, &hyper).unwrap()
    };
    let settings = BandSettings { draws: 10_000, ..BandSettings::new(2, 24, 99) };
    let bundle = irf_bands(&posterior(0.2), &settings).unwrap();
    ensure!(bundle.quantiles == (0.16, 0.84), "quantiles {:?}", bundle.quantiles);
    for h in 0..=24 {
        for var in 0..2 {
            for shock in 0..2 {
                let (lo, pt, hi) = (bundle.lower.get(var, shock, h), bundle.point.get(var, shock, h), bundle.upper.get(var, shock, h));
                ensure!(lo <= pt && pt <= hi, "h {h} ({var}, {shock}): {lo} {pt} {hi}");
            }
        }
    }
    let widths: Vec<f64> = [0.5, 0.2, 0.05]
        .iter()
        .map(|&l| mean_width(&irf_bands(&posterior(l), &BandSettings::new(2, 24, 3)).unwrap()))
        .collect();
    ensure!(widths[0] >= widths[1] && widths[1] >= widths[2], "widths {widths:?}");
    Ok(format!("point inside band at all 25 horizons; widths {:.4} >= {:.4} >= {:.4}", widths[0], widths[1], widths[2]))
}

fn golden_run() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let (_, config_path) = common::write_fixture(dir.path(), &common::spec(&["AT", "BE", "DE"]));
    let mut trees = Vec::new();
    let mut slowest = 0.0_f64;
    for (name, jobs) in [("a", 1), ("b", 1), ("c", 4)] {
        let mut config = common::load(&config_path, &dir.path().join(name));
        config.run.jobs = jobs;
        let start = Instant::now();
        let report = pipeline::cmd_pipeline(&config).map_err(|e| e.to_string())?;
        slowest = slowest.max(start.elapsed().as_secs_f64());
        ensure!(report.exit_code() == 0, "pipeline reported {} failures", report.manifest.failures());
        let mut tree = common::read_tree(&dir.path().join(name));
        tree.remove(MANIFEST);
        trees.push(tree);
    }
    ensure!(slowest < 60.0, "pipeline took {slowest:.1} s");
    ensure!(trees[0] == trees[1], "rerun changed output bytes");
    ensure!(trees[0] == trees[2], "--jobs 4 changed output bytes");
    std::panic::catch_unwind(|| common::check_golden(&trees[0])).map_err(|_| "golden mismatch".to_string())?;
    Ok(format!("{} files identical across reruns and jobs 1/4, golden match, slowest run {slowest:.1} s", trees[0].len()))
}

fn table1_layout() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let (_, config_path) = common::write_fixture(dir.path(), &common::spec(&["AT", "BE"]));
    let out = dir.path().join("out");
    let report = pipeline::cmd_table1(&common::load(&config_path, &out)).map_err(|e| e.to_string())?;
    ensure!(report.exit_code() == 0, "table1 failed");
    let bytes = std::fs::read(out.join("table1.csv")).unwrap();
    let header = String::from_utf8_lossy(&bytes).lines().next().unwrap_or_default().to_string();
    ensure!(header == "country,agent,indicator,mean,sd,corr_with_gdp_growth,n_overlap", "header {header}");
    let rows = common::csv_rows(&bytes);
    ensure!(rows.len() == 4, "{} rows", rows.len());
    Ok("rows per (country, agent) with mean, SD, GDP correlation; Austria DB target mean 0.447 / SD 0.034 \
        needs the official survey data and is documented, not enforced"
        .to_string())
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("indicator exactness", indicator_exactness),
        ("dual coding of D", dual_coding),
        ("DISP vs D", disp_versus_d),
        ("flat and dogmatic prior limits", prior_limits),
        ("analytic IRF", analytic_irf),
        ("Cholesky contract", cholesky_contract),
        ("BIC recovery", bic_recovery),
        ("band sanity", band_sanity),
        ("end-to-end golden run", golden_run),
        ("table layout", table1_layout),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let label = format!("criterion {:>2}: {name}", i + 1);
        if !filter.is_empty() && !filter.iter().any(|f| label.contains(f.as_str())) {
            continue;
        }
        let outcome = std::panic::catch_unwind(AssertUnwindSafe(check))
            .unwrap_or_else(|p| Err(p.downcast_ref::<String>().cloned().unwrap_or_else(|| "panicked".into())));
        match outcome {
            Ok(detail) => println!("{label} ... PASS ({detail})"),
            Err(why) => {
                failed += 1;
                println!("{label} ... FAIL ({why})");
            }
        }
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
