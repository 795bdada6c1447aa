//! Vector autoregressions: least squares and Minnesota-prior estimation, lag
//! selection, recursive identification and impulse responses.
//!
//! Data enter as a `T x n` matrix with rows ordered in time. The regressor row
//! for observation `t` is `[1, x_{t-1}', ..., x_{t-p}']` (the leading one only
//! when an intercept is estimated), so stacked coefficients are `k x n` with
//! `k = n p + intercept`.

mod irf;
mod minnesota;
mod ols;
mod simulate;

pub use irf::{
    cholesky_impact, impact_in_data_order, irf_bands, irf_point, spectral_radius, BandSettings,
    ImpulseResponse, IrfBundle, StabilityRule,
};
pub use minnesota::{
    ar1_scales, minnesota_posterior, MinnesotaHyper, MinnesotaPosterior, PosteriorDensity,
};
pub use ols::{bic_select, classical_se, hc0_se, hc_se, ols_var, LagSelection, VarEstimate};
pub use simulate::simulate_var;

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

/// Largest tolerated condition number of the regressor cross-product.
pub const MAX_CONDITION: f64 = 1e12;

#[derive(Debug, Error)]
pub enum VarError {
    #[error("insufficient observations: need {needed}, got {got}")]
    InsufficientObservations { needed: usize, got: usize },
    #[error("regressor cross-product is numerically singular (condition {condition:e})")]
    Singular { condition: f64 },
    #[error("not positive-definite (leading minor {minor} fails)")]
    NotPositiveDefinite { minor: usize },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("invalid hyperparameter: {0}")]
    InvalidHyper(String),
    #[error("singular posterior precision in equation {equation}")]
    SingularPosterior { equation: usize },
    #[error("degenerate posterior covariance in equation {equation}")]
    DegeneratePosterior { equation: usize },
    #[error("eigenvalue iteration did not converge after {0} iterations")]
    NoConvergence(usize),
    #[error("draw budget exhausted: {attempts} attempts for {draws} stable draws")]
    BudgetExhausted { attempts: usize, draws: usize },
    #[error("invalid settings: {0}")]
    InvalidSettings(String),
}

/// Lag order and deterministic terms.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct VarSpec {
    pub lags: usize,
    pub intercept: bool,
}

impl VarSpec {
    pub fn new(lags: usize, intercept: bool) -> Result<Self, VarError> {
        if lags == 0 {
            return Err(VarError::InvalidSettings("lag order must be at least 1".into()));
        }
        Ok(VarSpec { lags, intercept })
    }

    /// Regressors per equation.
    pub fn regressors(&self, n: usize) -> usize {
        n * self.lags + usize::from(self.intercept)
    }

    /// Row of the stacked coefficient matrix holding variable `var` at lag `lag` (1-based).
    pub fn lag_row(&self, n: usize, lag: usize, var: usize) -> usize {
        usize::from(self.intercept) + (lag - 1) * n + var
    }
}

/// `A_1 .. A_p` and the optional intercept of a VAR.
#[derive(Debug, Clone, PartialEq)]
pub struct VarCoefficients {
    pub lags: Vec<DMatrix<f64>>,
    pub intercept: Option<DVector<f64>>,
}

impl VarCoefficients {
    pub fn new(lags: Vec<DMatrix<f64>>, intercept: Option<DVector<f64>>) -> Result<Self, VarError> {
        let n = lags.first().ok_or_else(|| VarError::InvalidSettings("no lag matrices".into()))?.nrows();
        if lags.iter().any(|a| a.nrows() != n || a.ncols() != n) {
            return Err(VarError::DimensionMismatch("lag matrices must all be n x n".into()));
        }
        if intercept.as_ref().is_some_and(|c| c.len() != n) {
            return Err(VarError::DimensionMismatch("intercept length".into()));
        }
        Ok(VarCoefficients { lags, intercept })
    }

    pub fn n(&self) -> usize {
        self.lags[0].nrows()
    }

    pub fn order(&self) -> usize {
        self.lags.len()
    }

    pub fn spec(&self) -> VarSpec {
        VarSpec { lags: self.order(), intercept: self.intercept.is_some() }
    }

    /// Unpacks a `k x n` stacked coefficient matrix (column `i` is equation `i`).
    pub fn from_stacked(stacked: &DMatrix<f64>, spec: VarSpec) -> Self {
        let n = stacked.ncols();
        let lags = (1..=spec.lags)
            .map(|l| DMatrix::from_fn(n, n, |i, j| stacked[(spec.lag_row(n, l, j), i)]))
            .collect();
        let intercept = spec.intercept.then(|| DVector::from_fn(n, |i, _| stacked[(0, i)]));
        VarCoefficients { lags, intercept }
    }

    /// Builds coefficients from one regressor vector per equation.
    pub fn from_equations(equations: &[DVector<f64>], spec: VarSpec) -> Self {
        let n = equations.len();
        let k = spec.regressors(n);
        let stacked = DMatrix::from_fn(k, n, |r, i| equations[i][r]);
        Self::from_stacked(&stacked, spec)
    }

    /// The `np x np` first-order representation.
    pub fn companion(&self) -> DMatrix<f64> {
        let n = self.n();
        let p = self.order();
        let mut c = DMatrix::zeros(n * p, n * p);
        for (l, a) in self.lags.iter().enumerate() {
            c.view_mut((0, l * n), (n, n)).copy_from(a);
        }
        for i in n..n * p {
            c[(i, i - n)] = 1.0;
        }
        c
    }
}

/// Regressor and response matrices for a VAR(p) on `data`.
pub(crate) fn design(data: &DMatrix<f64>, spec: VarSpec) -> (DMatrix<f64>, DMatrix<f64>) {
    let (t, n) = data.shape();
    let p = spec.lags;
    let rows = t.saturating_sub(p);
    let k = spec.regressors(n);
    let x = DMatrix::from_fn(rows, k, |r, c| {
        if spec.intercept && c == 0 {
            return 1.0;
        }
        let c = c - usize::from(spec.intercept);
        let (lag, var) = (c / n + 1, c % n);
        data[(r + p - lag, var)]
    });
    let y = data.rows(p, rows).into_owned();
    (x, y)
}

/// Checks symmetry within `1e-10` and returns the lower Cholesky factor.
///
/// Fails with the 1-based index of the first leading minor that is not positive.
pub(crate) fn lower_cholesky(a: &DMatrix<f64>) -> Result<DMatrix<f64>, VarError> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(VarError::DimensionMismatch(format!("{}x{} is not square", n, a.ncols())));
    }
    let scale = a.iter().fold(0.0_f64, |m, v| m.max(v.abs())).max(1.0);
    for i in 0..n {
        for j in 0..i {
            if (a[(i, j)] - a[(j, i)]).abs() > 1e-10 * scale {
                return Err(VarError::DimensionMismatch("matrix is not symmetric".into()));
            }
        }
    }
    let mut l = DMatrix::<f64>::zeros(n, n);
    for j in 0..n {
        let mut d = a[(j, j)];
        for k in 0..j {
            d -= l[(j, k)] * l[(j, k)];
        }
        if !(d > 0.0) || !d.is_finite() {
            return Err(VarError::NotPositiveDefinite { minor: j + 1 });
        }
        let djj = d.sqrt();
        l[(j, j)] = djj;
        for i in j + 1..n {
            let mut s = a[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = s / djj;
        }
    }
    Ok(l)
}

/// Inverse of a symmetric positive-definite matrix after a conditioning check.
pub(crate) fn spd_inverse(a: &DMatrix<f64>) -> Result<DMatrix<f64>, VarError> {
    let eig = a.clone().symmetric_eigen();
    let max = eig.eigenvalues.max();
    let min = eig.eigenvalues.min();
    let condition = if min > 0.0 { max / min } else { f64::INFINITY };
    if !(condition <= MAX_CONDITION) {
        return Err(VarError::Singular { condition });
    }
    let chol = a.clone().cholesky().ok_or(VarError::Singular { condition })?;
    let inv = chol.inverse();
    Ok((&inv + inv.transpose()) * 0.5)
}
