//! Recursive identification, impulse responses and posterior bands.

use nalgebra::{DMatrix, DVector, Schur};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use super::{lower_cholesky, MinnesotaPosterior, VarCoefficients, VarError};

const SCHUR_EPS: f64 = 1e-10;
const SCHUR_MAX_ITER: usize = 10_000;

/// Draws with a companion spectral radius above this are explosive.
pub const EXPLOSIVE_RADIUS: f64 = 0.999;

fn check_ordering(ordering: &[usize], n: usize) -> Result<(), VarError> {
    let mut seen = vec![false; n];
    if ordering.len() != n {
        return Err(VarError::DimensionMismatch(format!("ordering has {} entries for {n} variables", ordering.len())));
    }
    for &i in ordering {
        if i >= n || std::mem::replace(&mut seen[i], true) {
            return Err(VarError::DimensionMismatch(format!("{ordering:?} is not a permutation")));
        }
    }
    Ok(())
}

/// Lower Cholesky factor of `sigma` after permuting rows and columns by `ordering`.
///
/// Column `j` is the impact of a one-standard-deviation shock to variable
/// `ordering[j]`, expressed in the permuted coordinates.
pub fn cholesky_impact(sigma: &DMatrix<f64>, ordering: &[usize]) -> Result<DMatrix<f64>, VarError> {
    let n = sigma.nrows();
    if sigma.ncols() != n {
        return Err(VarError::DimensionMismatch("sigma is not square".into()));
    }
    check_ordering(ordering, n)?;
    let permuted = DMatrix::from_fn(n, n, |i, j| sigma[(ordering[i], ordering[j])]);
    lower_cholesky(&permuted)
}

/// [`cholesky_impact`] mapped back to data order: entry `(i, j)` is the impact on
/// variable `i` of a shock to variable `j`.
pub fn impact_in_data_order(sigma: &DMatrix<f64>, ordering: &[usize]) -> Result<DMatrix<f64>, VarError> {
    let b = cholesky_impact(sigma, ordering)?;
    let n = b.nrows();
    let mut out = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            out[(ordering[i], ordering[j])] = b[(i, j)];
        }
    }
    Ok(out)
}

/// Responses by horizon: `responses[h][(variable, shock)]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ImpulseResponse {
    pub responses: Vec<DMatrix<f64>>,
}

impl ImpulseResponse {
    pub fn horizon(&self) -> usize {
        self.responses.len() - 1
    }

    pub fn get(&self, variable: usize, shock: usize, h: usize) -> f64 {
        self.responses[h][(variable, shock)]
    }

    /// Path of one response over `h = 0..=H`.
    pub fn path(&self, variable: usize, shock: usize) -> Vec<f64> {
        self.responses.iter().map(|m| m[(variable, shock)]).collect()
    }
}

/// Moving-average responses `Phi_h * impact` with `Phi_0 = I` and
/// `Phi_h = sum_{j=1}^{min(h, p)} A_j Phi_{h-j}`.
pub fn irf_point(coeffs: &VarCoefficients, impact: &DMatrix<f64>, horizon: usize) -> Result<ImpulseResponse, VarError> {
    let n = coeffs.n();
    if impact.shape() != (n, n) {
        return Err(VarError::DimensionMismatch(format!(
            "impact is {}x{}, VAR has {n} variables",
            impact.nrows(),
            impact.ncols()
        )));
    }
    let mut phis: Vec<DMatrix<f64>> = Vec::with_capacity(horizon + 1);
    phis.push(DMatrix::identity(n, n));
    for h in 1..=horizon {
        let mut phi = DMatrix::zeros(n, n);
        for j in 1..=h.min(coeffs.order()) {
            phi += &coeffs.lags[j - 1] * &phis[h - j];
        }
        phis.push(phi);
    }
    Ok(ImpulseResponse { responses: phis.iter().map(|phi| phi * impact).collect() })
}

/// Largest eigenvalue modulus of the companion matrix.
///
/// Eigenvalues come from a real Schur decomposition, which handles complex and
/// equal-modulus dominant pairs that defeat plain power iteration.
pub fn spectral_radius(coeffs: &VarCoefficients) -> Result<f64, VarError> {
    let companion = coeffs.companion();
    let schur = Schur::try_new(companion, SCHUR_EPS, SCHUR_MAX_ITER).ok_or(VarError::NoConvergence(SCHUR_MAX_ITER))?;
    Ok(schur.complex_eigenvalues().iter().map(|z| z.norm()).fold(0.0, f64::max))
}

/// What to do with posterior draws whose companion matrix is explosive.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum StabilityRule {
    Keep,
    #[default]
    Reject,
}

impl std::str::FromStr for StabilityRule {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "keep" => Ok(StabilityRule::Keep),
            "reject" => Ok(StabilityRule::Reject),
            other => Err(format!("unknown stability rule `{other}` (expected keep or reject)")),
        }
    }
}

impl std::fmt::Display for StabilityRule {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            StabilityRule::Keep => "keep",
            StabilityRule::Reject => "reject",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BandSettings {
    pub horizon: usize,
    pub draws: usize,
    pub seed: u64,
    pub quantiles: (f64, f64),
    pub stability: StabilityRule,
    /// Recursive ordering; the first entry is shocked first.
    pub ordering: Vec<usize>,
}

impl BandSettings {
    /// 68% bands, 1000 draws, explosive draws rejected, data order.
    pub fn new(n: usize, horizon: usize, seed: u64) -> Self {
        BandSettings {
            horizon,
            draws: 1000,
            seed,
            quantiles: (0.16, 0.84),
            stability: StabilityRule::Reject,
            ordering: (0..n).collect(),
        }
    }

    fn validate(&self) -> Result<(), VarError> {
        if self.draws < 100 {
            return Err(VarError::InvalidSettings(format!("draws must be at least 100, got {}", self.draws)));
        }
        let (lo, hi) = self.quantiles;
        if !(0.0 < lo && lo < hi && hi < 1.0) {
            return Err(VarError::InvalidSettings(format!("quantiles must satisfy 0 < {lo} < {hi} < 1")));
        }
        Ok(())
    }
}

/// Point responses at the posterior mean with pointwise posterior quantile bands.
#[derive(Debug, Clone, PartialEq)]
pub struct IrfBundle {
    pub horizon: usize,
    pub point: ImpulseResponse,
    pub lower: ImpulseResponse,
    pub upper: ImpulseResponse,
    pub quantiles: (f64, f64),
    pub draws: usize,
    pub seed: u64,
    pub rejected_explosive: usize,
    pub ordering: Vec<usize>,
}

/// Square root factor `L` with `L L' = cov`; falls back to a clamped eigen
/// decomposition when the covariance is only semidefinite.
fn covariance_root(cov: &DMatrix<f64>, equation: usize) -> Result<DMatrix<f64>, VarError> {
    if cov.iter().any(|v| !v.is_finite()) {
        return Err(VarError::DegeneratePosterior { equation });
    }
    if let Some(chol) = cov.clone().cholesky() {
        return Ok(chol.l());
    }
    let eig = cov.clone().symmetric_eigen();
    let scale = eig.eigenvalues.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    if eig.eigenvalues.iter().any(|&v| v < -1e-10 * scale.max(f64::MIN_POSITIVE)) {
        return Err(VarError::DegeneratePosterior { equation });
    }
    let roots = eig.eigenvalues.map(|v| v.max(0.0).sqrt());
    Ok(&eig.eigenvectors * DMatrix::from_diagonal(&roots))
}

fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    if lo == hi || sorted[lo] == sorted[hi] {
        return sorted[lo];
    }
    sorted[lo] + (sorted[hi] - sorted[lo]) * frac
}

/// Monte-Carlo bands from independent per-equation Normal posteriors.
///
/// Draw `d` uses its own random stream derived from `(seed, d)`, so results do
/// not depend on how the draws are scheduled across threads.
pub fn irf_bands(posterior: &MinnesotaPosterior, settings: &BandSettings) -> Result<IrfBundle, VarError> {
    settings.validate()?;
    let n = posterior.n();
    let spec = posterior.spec;
    let impact = impact_in_data_order(&posterior.sigma, &settings.ordering)?;
    let point = irf_point(&posterior.mean_coefficients(), &impact, settings.horizon)?;
    let roots = posterior
        .equations
        .iter()
        .enumerate()
        .map(|(i, e)| covariance_root(&e.covariance, i))
        .collect::<Result<Vec<_>, _>>()?;
    let k = spec.regressors(n);
    let budget = 10 * settings.draws;

    let outcomes: Vec<Result<(ImpulseResponse, usize), VarError>> = (0..settings.draws)
        .into_par_iter()
        .map(|d| {
            let mut rng = ChaCha8Rng::seed_from_u64(settings.seed);
            rng.set_stream(d as u64);
            let mut rejected = 0;
            loop {
                let betas: Vec<DVector<f64>> = posterior
                    .equations
                    .iter()
                    .zip(&roots)
                    .map(|(eq, root)| {
                        let z = DVector::from_fn(k, |_, _| rng.sample::<f64, _>(StandardNormal));
                        &eq.mean + root * z
                    })
                    .collect();
                let coeffs = VarCoefficients::from_equations(&betas, spec);
                if settings.stability == StabilityRule::Reject && spectral_radius(&coeffs)? > EXPLOSIVE_RADIUS {
                    rejected += 1;
                    if rejected >= budget {
                        return Err(VarError::BudgetExhausted { attempts: rejected, draws: settings.draws });
                    }
                    continue;
                }
                return Ok((irf_point(&coeffs, &impact, settings.horizon)?, rejected));
            }
        })
        .collect();

    let mut responses = Vec::with_capacity(settings.draws);
    let mut rejected_explosive = 0;
    for outcome in outcomes {
        let (irf, rejected) = outcome?;
        rejected_explosive += rejected;
        responses.push(irf);
    }
    let attempts = settings.draws + rejected_explosive;
    if attempts > budget {
        return Err(VarError::BudgetExhausted { attempts, draws: settings.draws });
    }

    let (q_lo, q_hi) = settings.quantiles;
    let mut lower = Vec::with_capacity(settings.horizon + 1);
    let mut upper = Vec::with_capacity(settings.horizon + 1);
    let mut buf = vec![0.0; responses.len()];
    for h in 0..=settings.horizon {
        let mut lo = DMatrix::zeros(n, n);
        let mut hi = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                for (slot, r) in buf.iter_mut().zip(&responses) {
                    *slot = r.responses[h][(i, j)];
                }
                buf.sort_by(f64::total_cmp);
                lo[(i, j)] = quantile_sorted(&buf, q_lo);
                hi[(i, j)] = quantile_sorted(&buf, q_hi);
            }
        }
        lower.push(lo);
        upper.push(hi);
    }

    Ok(IrfBundle {
        horizon: settings.horizon,
        point,
        lower: ImpulseResponse { responses: lower },
        upper: ImpulseResponse { responses: upper },
        quantiles: settings.quantiles,
        draws: settings.draws,
        seed: settings.seed,
        rejected_explosive,
        ordering: settings.ordering.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn var1(a: &[f64], n: usize) -> VarCoefficients {
        VarCoefficients::new(vec![DMatrix::from_row_slice(n, n, a)], None).unwrap()
    }

    #[test]
    fn cholesky_examples() {
        let b = cholesky_impact(&DMatrix::from_row_slice(2, 2, &[4.0, 0.0, 0.0, 9.0]), &[0, 1]).unwrap();
        assert_eq!(b, DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 3.0]));
        let b = cholesky_impact(&DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.5, 1.0]), &[0, 1]).unwrap();
        assert!((b[(1, 0)] - 0.5).abs() < 1e-15);
        assert!((b[(1, 1)] - 0.75_f64.sqrt()).abs() < 1e-15);
        assert_eq!(b[(0, 1)], 0.0);
        let err = cholesky_impact(&DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]), &[0, 1]).unwrap_err();
        assert!(err.to_string().starts_with("not positive-definite"));
        assert!(cholesky_impact(&DMatrix::identity(2, 2), &[0, 0]).is_err());
    }

    #[test]
    fn reordered_impact_maps_back() {
        let sigma = DMatrix::from_row_slice(2, 2, &[2.0, 0.6, 0.6, 1.0]);
        let m = impact_in_data_order(&sigma, &[1, 0]).unwrap();
        // Variable 1 ordered first: it does not react on impact to a shock in variable 0.
        assert_eq!(m[(1, 0)], 0.0);
        assert!((m[(1, 1)] - 1.0).abs() < 1e-15);
        assert!((&m * m.transpose() - &sigma).abs().max() < 1e-12);
    }

    #[test]
    fn hand_irf() {
        let coeffs = var1(&[0.5, 0.0, 0.2, 0.3], 2);
        let irf = irf_point(&coeffs, &DMatrix::identity(2, 2), 2).unwrap();
        assert_eq!(irf.path(0, 0), vec![1.0, 0.5, 0.25]);
        let v1: Vec<f64> = irf.path(1, 0);
        assert!((v1[1] - 0.2).abs() < 1e-15);
        assert!((v1[2] - 0.16).abs() < 1e-15);
        assert!(irf_point(&coeffs, &DMatrix::identity(3, 3), 2).is_err());
    }

    #[test]
    fn zero_dynamics_irf() {
        let coeffs = var1(&[0.0; 4], 2);
        let b0 = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.4, 2.0]);
        let irf = irf_point(&coeffs, &b0, 5).unwrap();
        assert_eq!(irf.responses[0], b0);
        for h in 1..=5 {
            assert!(irf.responses[h].iter().all(|v| *v == 0.0));
        }
    }

    #[test]
    fn spectral_radius_examples() {
        let scalar = var1(&[0.5], 1);
        assert!((spectral_radius(&scalar).unwrap() - 0.5).abs() < 1e-10);
        let diag = var1(&[0.9, 0.0, 0.0, -0.4], 2);
        assert!((spectral_radius(&diag).unwrap() - 0.9).abs() < 1e-10);
        let ar2 = VarCoefficients::new(
            vec![DMatrix::from_element(1, 1, 0.5), DMatrix::from_element(1, 1, 0.3)],
            None,
        )
        .unwrap();
        let root = (0.5 + (0.25_f64 + 1.2).sqrt()) / 2.0;
        assert!((spectral_radius(&ar2).unwrap() - root).abs() < 1e-10);
        // Rotation with radius 0.8: complex pair.
        let rot = var1(&[0.0, -0.8, 0.8, 0.0], 2);
        assert!((spectral_radius(&rot).unwrap() - 0.8).abs() < 1e-10);
    }

    #[test]
    fn quantile_interpolates() {
        let v = [1.0, 2.0, 3.0, 4.0, 5.0];
        assert_eq!(quantile_sorted(&v, 0.5), 3.0);
        assert!((quantile_sorted(&v, 0.1) - 1.4).abs() < 1e-12);
        assert_eq!(quantile_sorted(&[7.0; 4], 0.16), 7.0);
    }

    #[test]
    fn settings_validated() {
        let mut s = BandSettings::new(2, 24, 1);
        s.draws = 50;
        assert!(s.validate().is_err());
        let mut s = BandSettings::new(2, 24, 1);
        s.quantiles = (0.84, 0.16);
        assert!(s.validate().is_err());
    }
}
