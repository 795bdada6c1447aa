//! Descriptive statistics and lead-lag correlations.

use std::io::Write;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum StatsError {
    #[error("need at least {needed} observations, got {got}")]
    TooShort { needed: usize, got: usize },
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("constant series")]
    Constant,
    #[error("non-finite value in series")]
    NonFinite,
    #[error("insufficient overlap: {overlap} observations leave {left} at lag {lag}, need 3")]
    InsufficientOverlap { overlap: usize, lag: usize, left: usize },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub label: String,
    pub mean: f64,
    /// Sample standard deviation (n - 1 denominator).
    pub sd: f64,
    pub n: usize,
}

fn check_finite(xs: &[f64]) -> Result<(), StatsError> {
    if xs.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(StatsError::NonFinite)
    }
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

pub fn summary(label: impl Into<String>, series: &[f64]) -> Result<SummaryRow, StatsError> {
    if series.len() < 2 {
        return Err(StatsError::TooShort { needed: 2, got: series.len() });
    }
    check_finite(series)?;
    let mu = mean(series);
    let ss: f64 = series.iter().map(|x| (x - mu) * (x - mu)).sum();
    Ok(SummaryRow { label: label.into(), mean: mu, sd: (ss / (series.len() - 1) as f64).sqrt(), n: series.len() })
}

/// Identical values, or a sum of squared deviations indistinguishable from
/// rounding noise in the mean (which grows with the length of the sum).
fn is_flat(ss: f64, xs: &[f64]) -> bool {
    if xs.iter().all(|x| *x == xs[0]) {
        return true;
    }
    let scale = xs.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
    let noise = 2.0 * xs.len() as f64 * f64::EPSILON * scale;
    ss <= xs.len() as f64 * noise * noise
}

/// Sample Pearson correlation of two equal-length series.
///
/// Symmetric in its arguments bit for bit: `pearson(a, b) == pearson(b, a)`.
pub fn pearson(a: &[f64], b: &[f64]) -> Result<f64, StatsError> {
    if a.len() != b.len() {
        return Err(StatsError::LengthMismatch(a.len(), b.len()));
    }
    if a.len() < 3 {
        return Err(StatsError::TooShort { needed: 3, got: a.len() });
    }
    check_finite(a)?;
    check_finite(b)?;
    let (ma, mb) = (mean(a), mean(b));
    let mut sab = 0.0;
    let mut saa = 0.0;
    let mut sbb = 0.0;
    for (x, y) in a.iter().zip(b) {
        let (dx, dy) = (x - ma, y - mb);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    if is_flat(saa, a) || is_flat(sbb, b) {
        return Err(StatsError::Constant);
    }
    Ok((sab / (saa.sqrt() * sbb.sqrt())).clamp(-1.0, 1.0))
}

/// Correlations `value(k) = corr(a_t, b_{t+k})` for `k` in `[-K, K]`.
#[derive(Debug, Clone, PartialEq)]
pub struct CrossCorrelogram {
    pub max_lag: usize,
    /// Indexed by `k + max_lag`.
    pub values: Vec<f64>,
}

impl CrossCorrelogram {
    pub const CONVENTION: &'static str = "value(k) = corr(A_t, B_{t+k})";

    pub fn at(&self, k: isize) -> Option<f64> {
        let idx = k + self.max_lag as isize;
        usize::try_from(idx).ok().and_then(|i| self.values.get(i).copied())
    }

    pub fn lags(&self) -> impl Iterator<Item = (isize, f64)> + '_ {
        let k0 = self.max_lag as isize;
        self.values.iter().enumerate().map(move |(i, v)| (i as isize - k0, *v))
    }
}

/// Each lag uses the Pearson correlation of its own shifted overlap, so the
/// sample shrinks by `|k|`. `a` and `b` must already cover the same dates.
pub fn cross_correlogram(a: &[f64], b: &[f64], max_lag: usize) -> Result<CrossCorrelogram, StatsError> {
    if a.len() != b.len() {
        return Err(StatsError::LengthMismatch(a.len(), b.len()));
    }
    let n = a.len();
    if n < max_lag + 3 {
        return Err(StatsError::InsufficientOverlap { overlap: n, lag: max_lag, left: n.saturating_sub(max_lag) });
    }
    let k_max = max_lag as isize;
    let values = (-k_max..=k_max)
        .map(|k| {
            let s = k.unsigned_abs();
            if k >= 0 {
                pearson(&a[..n - s], &b[s..])
            } else {
                pearson(&a[s..], &b[..n - s])
            }
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(CrossCorrelogram { max_lag, values })
}

/// Writes `country,lag,value` rows.
pub fn write_correlogram_csv<W: Write>(
    rows: &[(&str, &CrossCorrelogram)],
    writer: W,
) -> Result<(), StatsError> {
    let mut out = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(writer);
    out.write_record(["country", "lag", "value"])?;
    for (country, ccf) in rows {
        for (k, v) in ccf.lags() {
            out.write_record([country.to_string(), k.to_string(), v.to_string()])?;
        }
    }
    out.flush()?;
    Ok(())
}
