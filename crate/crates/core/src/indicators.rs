//! Per-period disagreement metrics and their aggregation into DB / DC.
//!
//! Two metrics are available:
//!
//! ```text
//! DISP = sqrt(P + M - (P - M)^2)
//! D    = 1 - |s - O| / sqrt((N - 1) / N)
//! ```
//!
//! `DISP` is the standard deviation of the balance and ignores how the
//! neutral share is split. `D` places the share vector `s` on the
//! (N-1)-simplex and measures its Euclidean distance to the barycenter `O`,
//! normalized by the barycenter-to-vertex distance. `D` is 1 at the
//! barycenter (maximum disagreement) and 0 at a vertex (unanimity).

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use thiserror::Error;

use crate::calendar::MonthlySeries;
use crate::ingest::{Agent, Question, ShareVector, SurveyPanel};

/// Float guard for radicands and ratios that drift just outside their range.
const CLAMP_EPS: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum IndicatorError {
    #[error("DISP is defined for 3 categories, got {0}; collapse the answer categories first")]
    DispNeedsThree(usize),
    #[error("discrepancy needs at least 2 categories, got {0}")]
    TooFewCategories(usize),
    #[error("value {0} outside [0, 1]")]
    OutOfRange(f64),
    #[error("aggregate needs exactly 3 components, got {0}")]
    WrongCount(usize),
    #[error("mismatched ranges")]
    MismatchedRanges,
    #[error("mixed agents, metrics or countries across components")]
    MixedComponents,
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Disagreement metric.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum Metric {
    /// Geometric discrepancy.
    #[default]
    D,
    /// Standard deviation of the balance.
    Disp,
}

impl Metric {
    pub fn as_str(self) -> &'static str {
        match self {
            Metric::D => "D",
            Metric::Disp => "DISP",
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Metric {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "D" | "d" => Ok(Metric::D),
            "DISP" | "disp" => Ok(Metric::Disp),
            other => Err(format!("unknown metric `{other}` (expected D or DISP)")),
        }
    }
}

/// Standard deviation of the balance for a three-category share vector.
pub fn disp(share: &ShareVector) -> Result<f64, IndicatorError> {
    let v = share.values();
    if v.len() != 3 {
        return Err(IndicatorError::DispNeedsThree(v.len()));
    }
    let (p, m) = (v[0], v[2]);
    let radicand = p + m - (p - m) * (p - m);
    if radicand < 0.0 {
        if radicand < -CLAMP_EPS {
            return Err(IndicatorError::OutOfRange(radicand));
        }
        return Ok(0.0);
    }
    Ok(radicand.sqrt())
}

/// Geometric discrepancy on the simplex for any N >= 2.
pub fn discrepancy(share: &ShareVector) -> Result<f64, IndicatorError> {
    let v = share.values();
    let n = v.len();
    if n < 2 {
        return Err(IndicatorError::TooFewCategories(n));
    }
    let center = 1.0 / n as f64;
    let dist = v.iter().map(|x| (x - center) * (x - center)).sum::<f64>().sqrt();
    let radius = ((n - 1) as f64 / n as f64).sqrt();
    let d = 1.0 - dist / radius;
    if !(-CLAMP_EPS..=1.0 + CLAMP_EPS).contains(&d) {
        return Err(IndicatorError::OutOfRange(d));
    }
    Ok(d.clamp(0.0, 1.0))
}

pub fn evaluate(metric: Metric, share: &ShareVector) -> Result<f64, IndicatorError> {
    match metric {
        Metric::D => discrepancy(share),
        Metric::Disp => disp(share),
    }
}

/// One metric computed month by month for a single survey question.
#[derive(Debug, Clone, PartialEq)]
pub struct IndicatorSeries {
    pub metric: Metric,
    pub country: String,
    pub agent: Agent,
    pub question: Question,
    pub series: MonthlySeries,
}

pub fn indicator_series(panel: &SurveyPanel, metric: Metric) -> Result<IndicatorSeries, IndicatorError> {
    if metric == Metric::Disp && panel.categories() != 3 {
        return Err(IndicatorError::DispNeedsThree(panel.categories()));
    }
    let values = panel.shares().iter().map(|s| evaluate(metric, s)).collect::<Result<Vec<_>, _>>()?;
    Ok(IndicatorSeries {
        metric,
        country: panel.country.clone(),
        agent: panel.agent,
        question: panel.question,
        series: MonthlySeries::new(panel.start(), values),
    })
}

/// Pointwise mean of the three dimension indices of one agent (DB or DC).
#[derive(Debug, Clone, PartialEq)]
pub struct AggregateDisagreement {
    pub agent: Agent,
    pub metric: Metric,
    pub country: String,
    pub components: Vec<IndicatorSeries>,
    pub series: MonthlySeries,
}

impl AggregateDisagreement {
    pub fn label(&self) -> &'static str {
        self.agent.aggregate_label()
    }
}

pub fn aggregate(components: &[IndicatorSeries]) -> Result<AggregateDisagreement, IndicatorError> {
    if components.len() != 3 {
        return Err(IndicatorError::WrongCount(components.len()));
    }
    let first = &components[0];
    for c in &components[1..] {
        if c.agent != first.agent || c.metric != first.metric || c.country != first.country {
            return Err(IndicatorError::MixedComponents);
        }
        if c.series.start != first.series.start || c.series.len() != first.series.len() {
            return Err(IndicatorError::MismatchedRanges);
        }
    }
    let values = (0..first.series.len())
        .map(|i| components.iter().map(|c| c.series.values[i]).sum::<f64>() / 3.0)
        .collect();
    Ok(AggregateDisagreement {
        agent: first.agent,
        metric: first.metric,
        country: first.country.clone(),
        components: components.to_vec(),
        series: MonthlySeries::new(first.series.start, values),
    })
}

/// Writes `date,country,agent,question,metric,value` rows.
pub fn write_indicator_csv<W: Write>(series: &[&IndicatorSeries], writer: W) -> Result<(), IndicatorError> {
    let mut out = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(writer);
    out.write_record(["date", "country", "agent", "question", "metric", "value"])?;
    for s in series {
        for (date, v) in s.series.dates().zip(&s.series.values) {
            out.write_record([
                date.to_string(),
                s.country.clone(),
                s.agent.to_string(),
                s.question.to_string(),
                s.metric.to_string(),
                v.to_string(),
            ])?;
        }
    }
    out.flush()?;
    Ok(())
}

/// Same layout as [`write_indicator_csv`], with the question column holding the
/// aggregate label (`DB` or `DC`).
pub fn write_aggregate_csv<W: Write>(agg: &AggregateDisagreement, writer: W) -> Result<(), IndicatorError> {
    let mut out = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(writer);
    out.write_record(["date", "country", "agent", "question", "metric", "value"])?;
    for (date, v) in agg.series.dates().zip(&agg.series.values) {
        out.write_record([
            date.to_string(),
            agg.country.clone(),
            agg.agent.to_string(),
            agg.label().to_string(),
            agg.metric.to_string(),
            v.to_string(),
        ])?;
    }
    out.flush()?;
    Ok(())
}
