use nalgebra::{DMatrix, DVector};

use super::{design, lower_cholesky, spd_inverse, VarCoefficients, VarError, VarSpec};

/// Equation-by-equation least-squares fit of a VAR(p).
#[derive(Debug, Clone)]
pub struct VarEstimate {
    pub spec: VarSpec,
    pub coefficients: VarCoefficients,
    /// Stacked `k x n` coefficients, column `i` is equation `i`.
    pub stacked: DMatrix<f64>,
    /// Residual cross-moments divided by `T - p`.
    pub sigma: DMatrix<f64>,
    /// `(T - p) x n`.
    pub residuals: DMatrix<f64>,
    /// `(T - p) x k` regressors.
    pub regressors: DMatrix<f64>,
    pub effective_obs: usize,
}

impl VarEstimate {
    pub fn n(&self) -> usize {
        self.sigma.nrows()
    }
}

pub fn ols_var(data: &DMatrix<f64>, spec: VarSpec) -> Result<VarEstimate, VarError> {
    let (t, n) = data.shape();
    if n == 0 {
        return Err(VarError::DimensionMismatch("no variables".into()));
    }
    let k = spec.regressors(n);
    let needed = spec.lags + k + 2;
    if t < needed {
        return Err(VarError::InsufficientObservations { needed, got: t });
    }
    let (x, y) = design(data, spec);
    let xtx = x.transpose() * &x;
    let xtx_inv = spd_inverse(&xtx)?;
    let stacked = &xtx_inv * (x.transpose() * &y);
    let residuals = &y - &x * &stacked;
    let rows = residuals.nrows();
    let sigma = residuals.transpose() * &residuals / rows as f64;
    let sigma = (&sigma + sigma.transpose()) * 0.5;
    Ok(VarEstimate {
        spec,
        coefficients: VarCoefficients::from_stacked(&stacked, spec),
        stacked,
        sigma,
        residuals,
        regressors: x,
        effective_obs: rows,
    })
}

/// Lag order chosen by the Schwarz criterion with the criterion value per candidate.
#[derive(Debug, Clone, PartialEq)]
pub struct LagSelection {
    pub lags: usize,
    /// `criteria[p - 1]` is the criterion for lag order `p`.
    pub criteria: Vec<f64>,
}

/// Fits p = 1..=pmax on a common sample of `T - pmax` observations and returns
/// the minimizer of `ln det Sigma_p + ln(T_eff) / T_eff * (coefficients)`.
/// Ties go to the smaller order.
pub fn bic_select(data: &DMatrix<f64>, pmax: usize, intercept: bool) -> Result<LagSelection, VarError> {
    if pmax == 0 {
        return Err(VarError::InvalidSettings("pmax must be at least 1".into()));
    }
    let (t, n) = data.shape();
    let needed = pmax + VarSpec { lags: pmax, intercept }.regressors(n) + 2;
    if t < needed {
        return Err(VarError::InsufficientObservations { needed, got: t });
    }
    let t_eff = (t - pmax) as f64;
    let mut criteria = Vec::with_capacity(pmax);
    for p in 1..=pmax {
        let spec = VarSpec { lags: p, intercept };
        let sample = data.rows(pmax - p, t - pmax + p).into_owned();
        let est = ols_var(&sample, spec)?;
        let chol = lower_cholesky(&est.sigma)?;
        let log_det: f64 = 2.0 * chol.diagonal().iter().map(|d| d.ln()).sum::<f64>();
        let params = (n * spec.regressors(n)) as f64;
        criteria.push(log_det + t_eff.ln() / t_eff * params);
    }
    let mut best = 0;
    for (i, c) in criteria.iter().enumerate() {
        if *c < criteria[best] {
            best = i;
        }
    }
    Ok(LagSelection { lags: best + 1, criteria })
}

/// HC0 sandwich standard errors for one regression.
pub fn hc0_se(x: &DMatrix<f64>, residuals: &DVector<f64>) -> Result<DVector<f64>, VarError> {
    if x.nrows() != residuals.len() {
        return Err(VarError::DimensionMismatch("regressor rows vs residuals".into()));
    }
    let bread = spd_inverse(&(x.transpose() * x))?;
    let k = x.ncols();
    let mut meat = DMatrix::<f64>::zeros(k, k);
    for (row, e) in x.row_iter().zip(residuals.iter()) {
        let w = e * e;
        for a in 0..k {
            for b in 0..k {
                meat[(a, b)] += w * row[a] * row[b];
            }
        }
    }
    let cov = &bread * meat * &bread;
    Ok(cov.diagonal().map(|v| v.max(0.0).sqrt()))
}

/// Per-equation HC0 standard errors, in stacked-regressor order.
pub fn hc_se(est: &VarEstimate) -> Result<Vec<DVector<f64>>, VarError> {
    (0..est.n()).map(|i| hc0_se(&est.regressors, &est.residuals.column(i).into_owned())).collect()
}

/// Homoscedastic standard errors using the same `T - p` variance denominator as `sigma`.
pub fn classical_se(est: &VarEstimate) -> Result<Vec<DVector<f64>>, VarError> {
    let inv = spd_inverse(&(est.regressors.transpose() * &est.regressors))?;
    Ok((0..est.n()).map(|i| inv.diagonal().map(|d| (est.sigma[(i, i)] * d).sqrt())).collect())
}
