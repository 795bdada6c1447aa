use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::{VarCoefficients, VarError};

const BURN_IN: usize = 200;

/// Simulates `len` observations of a VAR with Gaussian shocks `impact * e_t`,
/// `e_t ~ N(0, I)`, after a burn-in started from zero.
pub fn simulate_var(
    coeffs: &VarCoefficients,
    impact: &DMatrix<f64>,
    len: usize,
    seed: u64,
) -> Result<DMatrix<f64>, VarError> {
    let n = coeffs.n();
    if impact.shape() != (n, n) {
        return Err(VarError::DimensionMismatch(format!("impact must be {n}x{n}")));
    }
    let p = coeffs.order();
    let total = len + BURN_IN;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut path: Vec<DVector<f64>> = Vec::with_capacity(total + p);
    path.extend((0..p).map(|_| DVector::zeros(n)));
    for _ in 0..total {
        let t = path.len();
        let shock = DVector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal));
        let mut x = impact * shock;
        if let Some(c) = &coeffs.intercept {
            x += c;
        }
        for (l, a) in coeffs.lags.iter().enumerate() {
            x += a * &path[t - 1 - l];
        }
        path.push(x);
    }
    let kept = &path[p + BURN_IN..];
    Ok(DMatrix::from_fn(len, n, |i, j| kept[i][j]))
}
