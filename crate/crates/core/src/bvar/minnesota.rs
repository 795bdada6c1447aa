//! Litterman-style Minnesota prior with the residual covariance held fixed.
//!
//! For equation `i`, the coefficient on variable `j` at lag `l` has prior mean
//! `delta` when `j == i` and `l == 1`, zero otherwise, and prior standard
//! deviation
//!
//! ```text
//! lambda1 / l^lambda3                       j == i
//! lambda1 * lambda2 * (s_i / s_j) / l^lambda3   j != i
//! lambda1 * lambda4 * s_i                   intercept
//! ```
//!
//! with `s_j` the residual standard deviation of a univariate AR(1) for
//! variable `j`. Each equation then has a conjugate Normal posterior given
//! `sigma_ii` from the least-squares fit.

use nalgebra::{DMatrix, DVector};

use super::{design, ols_var, VarCoefficients, VarError, VarSpec};

#[derive(Debug, Clone, PartialEq)]
pub struct MinnesotaHyper {
    /// Prior mean of each variable's own first lag.
    pub delta: f64,
    /// Overall tightness.
    pub lambda1: f64,
    /// Cross-variable weight.
    pub lambda2: f64,
    /// Lag decay.
    pub lambda3: f64,
    /// Intercept looseness.
    pub lambda4: f64,
    pub scales: Vec<f64>,
}

impl MinnesotaHyper {
    pub const DEFAULT_DELTA: f64 = 0.0;
    pub const DEFAULT_LAMBDA1: f64 = 0.2;
    pub const DEFAULT_LAMBDA2: f64 = 0.5;
    pub const DEFAULT_LAMBDA3: f64 = 1.0;
    pub const DEFAULT_LAMBDA4: f64 = 100.0;

    /// Default tightness settings with the given scales.
    pub fn with_scales(scales: Vec<f64>) -> Self {
        MinnesotaHyper {
            delta: Self::DEFAULT_DELTA,
            lambda1: Self::DEFAULT_LAMBDA1,
            lambda2: Self::DEFAULT_LAMBDA2,
            lambda3: Self::DEFAULT_LAMBDA3,
            lambda4: Self::DEFAULT_LAMBDA4,
            scales,
        }
    }

    /// Default tightness with scales from univariate AR(1) fits on `data`.
    pub fn from_data(data: &DMatrix<f64>) -> Result<Self, VarError> {
        Ok(Self::with_scales(ar1_scales(data)?))
    }

    pub fn validate(&self, n: usize) -> Result<(), VarError> {
        let bad = |m: String| Err(VarError::InvalidHyper(m));
        if !self.delta.is_finite() {
            return bad("delta must be finite".into());
        }
        if !(self.lambda1 > 0.0 && self.lambda1.is_finite()) {
            return bad(format!("lambda1 must be positive, got {}", self.lambda1));
        }
        if !(self.lambda2 > 0.0 && self.lambda2 <= 1.0) {
            return bad(format!("lambda2 must lie in (0, 1], got {}", self.lambda2));
        }
        if !(self.lambda3 >= 0.0 && self.lambda3.is_finite()) {
            return bad(format!("lambda3 must be nonnegative, got {}", self.lambda3));
        }
        if !(self.lambda4 > 0.0 && self.lambda4.is_finite()) {
            return bad(format!("lambda4 must be positive, got {}", self.lambda4));
        }
        if self.scales.len() != n {
            return bad(format!("expected {n} scales, got {}", self.scales.len()));
        }
        if let Some(s) = self.scales.iter().find(|s| !(**s > 0.0 && s.is_finite())) {
            return bad(format!("scales must be positive, got {s}"));
        }
        Ok(())
    }

    /// Prior mean and variances for equation `eq`, in stacked-regressor order.
    pub fn prior(&self, spec: VarSpec, n: usize, eq: usize) -> (DVector<f64>, DVector<f64>) {
        let k = spec.regressors(n);
        let mut mean = DVector::zeros(k);
        let mut var = DVector::zeros(k);
        if spec.intercept {
            var[0] = (self.lambda1 * self.lambda4 * self.scales[eq]).powi(2);
        }
        for lag in 1..=spec.lags {
            let decay = (lag as f64).powf(self.lambda3);
            for j in 0..n {
                let row = spec.lag_row(n, lag, j);
                let sd = if j == eq {
                    self.lambda1 / decay
                } else {
                    self.lambda1 * self.lambda2 * (self.scales[eq] / self.scales[j]) / decay
                };
                var[row] = sd * sd;
                if j == eq && lag == 1 {
                    mean[row] = self.delta;
                }
            }
        }
        (mean, var)
    }
}

/// Residual standard deviations of univariate AR(1) fits with intercept.
pub fn ar1_scales(data: &DMatrix<f64>) -> Result<Vec<f64>, VarError> {
    (0..data.ncols())
        .map(|j| {
            let column = data.column(j).into_owned();
            let est = ols_var(&DMatrix::from_column_slice(column.len(), 1, column.as_slice()), VarSpec { lags: 1, intercept: true })?;
            Ok(est.sigma[(0, 0)].sqrt())
        })
        .collect()
}

/// Normal posterior of one equation's regressor coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorDensity {
    pub mean: DVector<f64>,
    pub covariance: DMatrix<f64>,
}

#[derive(Debug, Clone)]
pub struct MinnesotaPosterior {
    pub spec: VarSpec,
    pub equations: Vec<PosteriorDensity>,
    /// Residual covariance held fixed at its least-squares value.
    pub sigma: DMatrix<f64>,
}

impl MinnesotaPosterior {
    pub fn n(&self) -> usize {
        self.sigma.nrows()
    }

    pub fn mean_coefficients(&self) -> VarCoefficients {
        let means: Vec<_> = self.equations.iter().map(|e| e.mean.clone()).collect();
        VarCoefficients::from_equations(&means, self.spec)
    }
}

pub fn minnesota_posterior(
    data: &DMatrix<f64>,
    spec: VarSpec,
    hyper: &MinnesotaHyper,
) -> Result<MinnesotaPosterior, VarError> {
    let n = data.ncols();
    hyper.validate(n)?;
    let ols = ols_var(data, spec)?;
    let (x, y) = design(data, spec);
    let xtx = x.transpose() * &x;
    let xty = x.transpose() * &y;

    let mut equations = Vec::with_capacity(n);
    for eq in 0..n {
        let s2 = ols.sigma[(eq, eq)];
        if !(s2 > 0.0) {
            return Err(VarError::SingularPosterior { equation: eq });
        }
        let (b0, v0) = hyper.prior(spec, n, eq);
        let prior_precision = v0.map(|v| 1.0 / v);
        let mut precision = &xtx / s2;
        for (r, w) in prior_precision.iter().enumerate() {
            precision[(r, r)] += w;
        }
        let rhs = xty.column(eq) / s2 + prior_precision.component_mul(&b0);
        let chol = precision.cholesky().ok_or(VarError::SingularPosterior { equation: eq })?;
        let mean = chol.solve(&rhs);
        let cov = chol.inverse();
        let covariance = (&cov + cov.transpose()) * 0.5;
        if mean.iter().chain(covariance.iter()).any(|v| !v.is_finite()) {
            return Err(VarError::SingularPosterior { equation: eq });
        }
        equations.push(PosteriorDensity { mean, covariance });
    }
    Ok(MinnesotaPosterior { spec, equations, sigma: ols.sigma })
}
