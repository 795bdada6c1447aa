//! Survey share and macro series ingestion.
//!
//! Shares are held as fractions in `[0, 1]` everywhere inside the crate; percent
//! inputs are converted when a file is parsed. Panels must cover consecutive
//! months: a missing month is an error, never imputed.

use std::collections::BTreeMap;
use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};
use thiserror::Error;

use crate::calendar::{DateParseError, Month, MonthlySeries, PeriodLabel};

/// Default renormalization tolerance; published tables round to a tenth of a percent.
pub const DEFAULT_TOLERANCE: f64 = 0.02;

/// Sums within this distance of one are float noise and kept untouched.
const EXACT_SUM_EPS: f64 = 1e-12;

/// Tolerance on the unit sum of a constructed [`ShareVector`].
pub const UNIT_SUM_EPS: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("negative share {value} in category {index}")]
    NegativeShare { index: usize, value: f64 },
    #[error("non-finite share in category {index}")]
    NonFiniteShare { index: usize },
    #[error("sum {sum} outside tolerance {tolerance}")]
    SumOutsideTolerance { sum: f64, tolerance: f64 },
    #[error("a share vector needs at least 2 categories, got {0}")]
    TooFewCategories(usize),
    #[error("expected {expected} categories, got {found}")]
    WrongCategoryCount { expected: usize, found: usize },
    #[error("{source} at line {line}")]
    AtLine {
        line: u64,
        #[source]
        source: Box<IngestError>,
    },
    #[error("malformed row: {0}")]
    Malformed(String),
    #[error(transparent)]
    Date(#[from] DateParseError),
    #[error("unknown agent `{0}` (expected business or consumer)")]
    UnknownAgent(String),
    #[error("unknown question `{0}` (expected activity, prices or employment)")]
    UnknownQuestion(String),
    #[error("missing column `{0}` in header")]
    MissingColumn(String),
    #[error("duplicate row for {key} at line {line}")]
    DuplicateKey { key: String, line: u64 },
    #[error("gap in monthly coverage for {key}: {after} is followed by {next}")]
    Gap { key: String, after: Month, next: Month },
    #[error("series for {0} mixes monthly and quarterly dates")]
    MixedFrequency(String),
    #[error("already monthly")]
    AlreadyMonthly,
    #[error("linear alignment needs at least 2 quarters, got {0}")]
    TooFewQuarters(usize),
    #[error("series for {0} is not monthly")]
    NotMonthly(String),
    #[error("empty overlap")]
    EmptyOverlap,
    #[error("empty series")]
    Empty,
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl IngestError {
    fn at_line(self, line: u64) -> Self {
        IngestError::AtLine { line, source: Box::new(self) }
    }
}

/// Category proportions of one survey question at one date.
///
/// Entries are nonnegative and sum to one within [`UNIT_SUM_EPS`]. For the
/// three-category case the order is (up, unchanged, down).
#[derive(Debug, Clone, PartialEq)]
pub struct ShareVector(Vec<f64>);

impl ShareVector {
    /// Strict constructor: the values must already sum to one.
    pub fn new(values: Vec<f64>) -> Result<Self, IngestError> {
        check_entries(&values)?;
        let sum: f64 = values.iter().sum();
        if (sum - 1.0).abs() > UNIT_SUM_EPS {
            return Err(IngestError::SumOutsideTolerance { sum, tolerance: UNIT_SUM_EPS });
        }
        Ok(ShareVector(values))
    }

    /// Equal shares over `n` categories (the simplex barycenter).
    pub fn uniform(n: usize) -> Result<Self, IngestError> {
        if n < 2 {
            return Err(IngestError::TooFewCategories(n));
        }
        Ok(ShareVector(vec![1.0 / n as f64; n]))
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn categories(&self) -> usize {
        self.0.len()
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

fn check_entries(values: &[f64]) -> Result<(), IngestError> {
    if values.len() < 2 {
        return Err(IngestError::TooFewCategories(values.len()));
    }
    for (index, &value) in values.iter().enumerate() {
        if !value.is_finite() {
            return Err(IngestError::NonFiniteShare { index });
        }
        if value < 0.0 {
            return Err(IngestError::NegativeShare { index, value });
        }
    }
    Ok(())
}

/// Rescales raw nonnegative shares to unit sum when the sum is within `tol` of one.
///
/// Vectors whose sum already equals one up to float noise are returned unchanged,
/// so written-out shares parse back bit-identically.
pub fn renormalize(shares: &[f64], tol: f64) -> Result<ShareVector, IngestError> {
    check_entries(shares)?;
    let sum: f64 = shares.iter().sum();
    let dev = (sum - 1.0).abs();
    if dev <= EXACT_SUM_EPS {
        return Ok(ShareVector(shares.to_vec()));
    }
    if dev > tol {
        return Err(IngestError::SumOutsideTolerance { sum, tolerance: tol });
    }
    Ok(ShareVector(shares.iter().map(|v| v / sum).collect()))
}

/// Maps the six consumer answer shares (strongly positive, positive, same,
/// negative, strongly negative, don't know) onto (P, E, M).
///
/// Both positive answers go to P, both negative answers to M, and "same" plus
/// "don't know" to E.
pub fn collapse_consumer_categories(raw: &ShareVector) -> Result<ShareVector, IngestError> {
    let v = raw.values();
    if v.len() != 6 {
        return Err(IngestError::WrongCategoryCount { expected: 6, found: v.len() });
    }
    Ok(ShareVector(vec![v[0] + v[1], v[2] + v[5], v[3] + v[4]]))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Agent {
    Business,
    Consumer,
}

impl Agent {
    pub const ALL: [Agent; 2] = [Agent::Business, Agent::Consumer];

    pub fn as_str(self) -> &'static str {
        match self {
            Agent::Business => "business",
            Agent::Consumer => "consumer",
        }
    }

    /// Name of the aggregate disagreement index for this agent.
    pub fn aggregate_label(self) -> &'static str {
        match self {
            Agent::Business => "DB",
            Agent::Consumer => "DC",
        }
    }
}

impl fmt::Display for Agent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Agent {
    type Err = IngestError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "business" => Ok(Agent::Business),
            "consumer" => Ok(Agent::Consumer),
            other => Err(IngestError::UnknownAgent(other.to_string())),
        }
    }
}

/// Survey dimension: economic activity, prices or employment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Question {
    Activity,
    Prices,
    Employment,
}

impl Question {
    pub const ALL: [Question; 3] = [Question::Activity, Question::Prices, Question::Employment];

    pub fn as_str(self) -> &'static str {
        match self {
            Question::Activity => "activity",
            Question::Prices => "prices",
            Question::Employment => "employment",
        }
    }
}

impl fmt::Display for Question {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Question {
    type Err = IngestError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "activity" => Ok(Question::Activity),
            "prices" => Ok(Question::Prices),
            "employment" => Ok(Question::Employment),
            other => Err(IngestError::UnknownQuestion(other.to_string())),
        }
    }
}

/// Monthly share vectors for one (country, agent, question).
#[derive(Debug, Clone, PartialEq)]
pub struct SurveyPanel {
    pub country: String,
    pub agent: Agent,
    pub question: Question,
    start: Month,
    shares: Vec<ShareVector>,
}

impl SurveyPanel {
    /// Builds a panel over consecutive months from `start`. All vectors must share one N.
    pub fn new(
        country: impl Into<String>,
        agent: Agent,
        question: Question,
        start: Month,
        shares: Vec<ShareVector>,
    ) -> Result<Self, IngestError> {
        let first = shares.first().ok_or(IngestError::Empty)?.categories();
        if let Some(bad) = shares.iter().find(|s| s.categories() != first) {
            return Err(IngestError::WrongCategoryCount { expected: first, found: bad.categories() });
        }
        Ok(SurveyPanel { country: country.into(), agent, question, start, shares })
    }

    pub fn start(&self) -> Month {
        self.start
    }

    pub fn end(&self) -> Month {
        self.start.offset(self.shares.len() as i64 - 1)
    }

    pub fn len(&self) -> usize {
        self.shares.len()
    }

    pub fn is_empty(&self) -> bool {
        self.shares.is_empty()
    }

    pub fn categories(&self) -> usize {
        self.shares[0].categories()
    }

    pub fn shares(&self) -> &[ShareVector] {
        &self.shares
    }

    pub fn iter(&self) -> impl Iterator<Item = (Month, &ShareVector)> + '_ {
        self.shares.iter().enumerate().map(move |(i, s)| (self.start.offset(i as i64), s))
    }

    /// Applies [`collapse_consumer_categories`] to every month.
    pub fn collapse_consumer(&self) -> Result<SurveyPanel, IngestError> {
        let shares =
            self.shares.iter().map(collapse_consumer_categories).collect::<Result<Vec<_>, _>>()?;
        Ok(SurveyPanel { shares, ..self.clone() })
    }
}

/// Unit in which a file states its shares.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ShareUnit {
    Percent,
    Fraction,
}

impl ShareUnit {
    fn scale(self) -> f64 {
        match self {
            ShareUnit::Percent => 100.0,
            ShareUnit::Fraction => 1.0,
        }
    }
}

/// Column mapping for survey files.
#[derive(Debug, Clone)]
pub struct SurveySchema {
    pub date: String,
    pub country: String,
    pub agent: String,
    pub question: String,
    /// Category columns in order; `None` takes every other header column in file order.
    pub categories: Option<Vec<String>>,
    pub unit: ShareUnit,
    pub tolerance: f64,
}

impl SurveySchema {
    pub fn new(unit: ShareUnit) -> Self {
        SurveySchema {
            date: "date".into(),
            country: "country".into(),
            agent: "agent".into(),
            question: "question".into(),
            categories: None,
            unit,
            tolerance: DEFAULT_TOLERANCE,
        }
    }
}

impl Default for SurveySchema {
    fn default() -> Self {
        SurveySchema::new(ShareUnit::Percent)
    }
}

fn column(headers: &csv::StringRecord, name: &str) -> Result<usize, IngestError> {
    headers
        .iter()
        .position(|h| h.trim() == name)
        .ok_or_else(|| IngestError::MissingColumn(name.to_string()))
}

type PanelKey = (String, Agent, Question);

/// Parses a header-bearing survey table into validated panels, one per
/// (country, agent, question), sorted by that key.
pub fn parse_survey_csv<R: Read>(
    source: R,
    schema: &SurveySchema,
) -> Result<Vec<SurveyPanel>, IngestError> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(source);
    let headers = reader.headers()?.clone();
    let date_col = column(&headers, &schema.date)?;
    let country_col = column(&headers, &schema.country)?;
    let agent_col = column(&headers, &schema.agent)?;
    let question_col = column(&headers, &schema.question)?;
    let category_cols: Vec<usize> = match &schema.categories {
        Some(names) => names.iter().map(|n| column(&headers, n)).collect::<Result<_, _>>()?,
        None => (0..headers.len())
            .filter(|i| ![date_col, country_col, agent_col, question_col].contains(i))
            .collect(),
    };
    if category_cols.len() < 2 {
        return Err(IngestError::TooFewCategories(category_cols.len()));
    }

    let mut rows: BTreeMap<PanelKey, Vec<(Month, ShareVector, u64)>> = BTreeMap::new();
    for record in reader.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        let parse_row = || -> Result<(PanelKey, Month, ShareVector), IngestError> {
            let field = |i: usize| {
                record
                    .get(i)
                    .ok_or_else(|| IngestError::Malformed(format!("missing field {}", i + 1)))
            };
            let date: Month = field(date_col)?.parse()?;
            let country = field(country_col)?.trim().to_string();
            if country.is_empty() {
                return Err(IngestError::Malformed("empty country".into()));
            }
            let agent: Agent = field(agent_col)?.parse()?;
            let question: Question = field(question_col)?.parse()?;
            let raw = category_cols
                .iter()
                .map(|&i| {
                    let text = field(i)?.trim();
                    text.parse::<f64>()
                        .map(|v| v / schema.unit.scale())
                        .map_err(|_| IngestError::Malformed(format!("bad number `{text}`")))
                })
                .collect::<Result<Vec<_>, _>>()?;
            let shares = renormalize(&raw, schema.tolerance)?;
            Ok(((country, agent, question), date, shares))
        };
        let (key, date, shares) = parse_row().map_err(|e| e.at_line(line))?;
        rows.entry(key).or_default().push((date, shares, line));
    }

    let mut panels = Vec::with_capacity(rows.len());
    for ((country, agent, question), mut entries) in rows {
        let key = format!("{country}/{agent}/{question}");
        entries.sort_by_key(|(date, _, line)| (*date, *line));
        for pair in entries.windows(2) {
            let ((prev, _, _), (next, _, line)) = (&pair[0], &pair[1]);
            if prev == next {
                return Err(IngestError::DuplicateKey { key: format!("{key} {next}"), line: *line });
            }
            if next.ordinal() != prev.ordinal() + 1 {
                return Err(IngestError::Gap { key, after: *prev, next: *next });
            }
        }
        let start = entries[0].0;
        let shares = entries.into_iter().map(|(_, s, _)| s).collect();
        panels.push(SurveyPanel::new(country, agent, question, start, shares)?);
    }
    Ok(panels)
}

/// Writes panels in the survey layout with shares as fractions.
///
/// Every panel must have `category_names.len()` categories.
pub fn write_survey_csv<W: Write>(
    panels: &[SurveyPanel],
    category_names: &[&str],
    writer: W,
) -> Result<(), IngestError> {
    let mut out = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(writer);
    let mut header = vec!["date", "country", "agent", "question"];
    header.extend_from_slice(category_names);
    out.write_record(&header)?;
    for panel in panels {
        if panel.categories() != category_names.len() {
            return Err(IngestError::WrongCategoryCount {
                expected: category_names.len(),
                found: panel.categories(),
            });
        }
        for (date, shares) in panel.iter() {
            let mut record = vec![
                date.to_string(),
                panel.country.clone(),
                panel.agent.to_string(),
                panel.question.to_string(),
            ];
            record.extend(shares.values().iter().map(|v| v.to_string()));
            out.write_record(&record)?;
        }
    }
    out.flush()?;
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Frequency {
    Monthly,
    Quarterly,
}

/// Growth rates (percent, year on year) for one country.
///
/// Quarterly series store one value per quarter and `start` is the first month
/// of the first quarter.
#[derive(Debug, Clone, PartialEq)]
pub struct MacroSeries {
    pub country: String,
    pub frequency: Frequency,
    pub start: Month,
    pub values: Vec<f64>,
}

impl MacroSeries {
    pub fn monthly(&self) -> Option<MonthlySeries> {
        (self.frequency == Frequency::Monthly).then(|| MonthlySeries::new(self.start, self.values.clone()))
    }

    fn step(&self) -> i64 {
        match self.frequency {
            Frequency::Monthly => 1,
            Frequency::Quarterly => 3,
        }
    }
}

/// Parses `date,country,gdp_growth` rows; dates are `YYYY-MM` or `YYYY-Qn`.
pub fn parse_macro_csv<R: Read>(source: R) -> Result<Vec<MacroSeries>, IngestError> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(source);
    let headers = reader.headers()?.clone();
    let date_col = column(&headers, "date")?;
    let country_col = column(&headers, "country")?;
    let value_col = column(&headers, "gdp_growth")?;

    let mut rows: BTreeMap<String, Vec<(PeriodLabel, f64, u64)>> = BTreeMap::new();
    for record in reader.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        let parse_row = || -> Result<(String, PeriodLabel, f64), IngestError> {
            let field = |i: usize| {
                record
                    .get(i)
                    .map(str::trim)
                    .ok_or_else(|| IngestError::Malformed(format!("missing field {}", i + 1)))
            };
            let period: PeriodLabel = field(date_col)?.parse()?;
            let text = field(value_col)?;
            let value = text
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| IngestError::Malformed(format!("bad number `{text}`")))?;
            Ok((field(country_col)?.to_string(), period, value))
        };
        let (country, period, value) = parse_row().map_err(|e| e.at_line(line))?;
        rows.entry(country).or_default().push((period, value, line));
    }

    let mut out = Vec::with_capacity(rows.len());
    for (country, entries) in rows {
        let frequency = match entries[0].0 {
            PeriodLabel::Month(_) => Frequency::Monthly,
            PeriodLabel::Quarter(_) => Frequency::Quarterly,
        };
        let mut dated = Vec::with_capacity(entries.len());
        for (period, value, line) in entries {
            match (frequency, period) {
                (Frequency::Monthly, PeriodLabel::Month(m))
                | (Frequency::Quarterly, PeriodLabel::Quarter(m)) => dated.push((m, value, line)),
                _ => return Err(IngestError::MixedFrequency(country)),
            }
        }
        dated.sort_by_key(|(m, _, line)| (*m, *line));
        let step = if frequency == Frequency::Monthly { 1 } else { 3 };
        for pair in dated.windows(2) {
            let ((prev, _, _), (next, _, line)) = (&pair[0], &pair[1]);
            if prev == next {
                return Err(IngestError::DuplicateKey { key: format!("{country} {next}"), line: *line });
            }
            if next.ordinal() != prev.ordinal() + step {
                return Err(IngestError::Gap { key: country, after: *prev, next: *next });
            }
        }
        out.push(MacroSeries {
            country,
            frequency,
            start: dated[0].0,
            values: dated.into_iter().map(|(_, v, _)| v).collect(),
        });
    }
    Ok(out)
}

/// Writes series in the `date,country,gdp_growth` layout.
pub fn write_macro_csv<W: Write>(series: &[MacroSeries], writer: W) -> Result<(), IngestError> {
    let mut out = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(writer);
    out.write_record(["date", "country", "gdp_growth"])?;
    for s in series {
        for (i, v) in s.values.iter().enumerate() {
            let month = s.start.offset(i as i64 * s.step());
            let date = match s.frequency {
                Frequency::Monthly => month.to_string(),
                Frequency::Quarterly => format!("{:04}-Q{}", month.year(), month.quarter()),
            };
            out.write_record([date, s.country.clone(), v.to_string()])?;
        }
    }
    out.flush()?;
    Ok(())
}

/// Quarterly-to-monthly conversion rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Alignment {
    /// Each quarter's value on all three of its months.
    #[default]
    Step,
    /// Values anchored at mid-quarter months, linearly interpolated, flat at the edges.
    Linear,
}

impl FromStr for Alignment {
    type Err = IngestError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "step" => Ok(Alignment::Step),
            "linear" => Ok(Alignment::Linear),
            other => Err(IngestError::InvalidParameter(format!("unknown alignment `{other}`"))),
        }
    }
}

impl fmt::Display for Alignment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Alignment::Step => "step",
            Alignment::Linear => "linear",
        })
    }
}

/// Converts a quarterly series to monthly over the same span.
pub fn align_frequency(series: &MacroSeries, method: Alignment) -> Result<MacroSeries, IngestError> {
    if series.frequency == Frequency::Monthly {
        return Err(IngestError::AlreadyMonthly);
    }
    let q = &series.values;
    let values = match method {
        Alignment::Step => {
            if q.is_empty() {
                return Err(IngestError::Empty);
            }
            q.iter().flat_map(|&v| [v; 3]).collect()
        }
        Alignment::Linear => {
            if q.len() < 2 {
                return Err(IngestError::TooFewQuarters(q.len()));
            }
            // Month i of the output; quarter j is anchored at month 3j + 1.
            (0..3 * q.len())
                .map(|i| {
                    if i <= 1 {
                        return q[0];
                    }
                    let j = (i - 1) / 3;
                    if j + 1 >= q.len() {
                        return q[q.len() - 1];
                    }
                    let frac = (i - (3 * j + 1)) as f64 / 3.0;
                    q[j] + (q[j + 1] - q[j]) * frac
                })
                .collect()
        }
    };
    Ok(MacroSeries {
        country: series.country.clone(),
        frequency: Frequency::Monthly,
        start: series.start,
        values,
    })
}

/// Parameters of the synthetic share generator.
///
/// A latent composition follows a logistic-normal autoregression in additive
/// log-ratio coordinates (last category as reference) with coefficient
/// `persistence` and stationary standard deviation `latent_sd` around the
/// long-run composition `center` (the barycenter when `None`). Each month's
/// observed shares are a Dirichlet draw with mean equal to the latent
/// composition and total concentration `concentration`.
#[derive(Debug, Clone)]
pub struct ShareSimulation {
    pub seed: u64,
    pub months: usize,
    pub categories: usize,
    pub persistence: f64,
    pub concentration: f64,
    pub latent_sd: f64,
    pub center: Option<Vec<f64>>,
    pub start: Month,
    pub country: String,
    pub agent: Agent,
    pub question: Question,
}

/// Output of [`ShareSimulation::run`] with the latent compositions kept for checks.
#[derive(Debug, Clone)]
pub struct SimulatedPanel {
    pub panel: SurveyPanel,
    pub latent: Vec<Vec<f64>>,
}

impl ShareSimulation {
    pub fn new(seed: u64, months: usize, categories: usize, persistence: f64, concentration: f64) -> Self {
        ShareSimulation {
            seed,
            months,
            categories,
            persistence,
            concentration,
            latent_sd: 0.5,
            center: None,
            start: Month::new(2005, 5).expect("valid month"),
            country: "SIM".into(),
            agent: Agent::Business,
            question: Question::Activity,
        }
    }

    fn validate(&self) -> Result<(), IngestError> {
        let bad = |msg: &str| Err(IngestError::InvalidParameter(msg.to_string()));
        if self.months < 1 {
            return bad("months must be at least 1");
        }
        if self.categories < 2 {
            return bad("categories must be at least 2");
        }
        if !(0.0..1.0).contains(&self.persistence) {
            return bad("persistence must lie in [0, 1)");
        }
        if !(self.concentration > 0.0 && self.concentration.is_finite()) {
            return bad("concentration must be positive and finite");
        }
        if !(self.latent_sd >= 0.0 && self.latent_sd.is_finite()) {
            return bad("latent_sd must be nonnegative");
        }
        if let Some(center) = &self.center {
            if center.len() != self.categories || center.iter().any(|c| !(*c > 0.0)) {
                return bad("center must have one positive share per category");
            }
            ShareVector::new(center.clone())?;
        }
        Ok(())
    }

    pub fn run(&self) -> Result<SimulatedPanel, IngestError> {
        self.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let dims = self.categories - 1;
        let innovation_sd = self.latent_sd * (1.0 - self.persistence * self.persistence).sqrt();
        // Long-run mean in log-ratio coordinates against the last category.
        let level: Vec<f64> = match &self.center {
            Some(c) => (0..dims).map(|j| (c[j] / c[dims]).ln()).collect(),
            None => vec![0.0; dims],
        };

        let mut state: Vec<f64> =
            (0..dims).map(|_| self.latent_sd * rng.sample::<f64, _>(StandardNormal)).collect();
        let mut latent = Vec::with_capacity(self.months);
        let mut shares = Vec::with_capacity(self.months);
        for t in 0..self.months {
            if t > 0 {
                for x in state.iter_mut() {
                    *x = self.persistence * *x + innovation_sd * rng.sample::<f64, _>(StandardNormal);
                }
            }
            let logits: Vec<f64> = state.iter().zip(&level).map(|(x, mu)| x + mu).collect();
            let mean = softmax_with_reference(&logits);
            let draw = dirichlet(&mut rng, &mean, self.concentration)?;
            shares.push(renormalize(&draw, UNIT_SUM_EPS)?);
            latent.push(mean);
        }
        let panel = SurveyPanel::new(self.country.clone(), self.agent, self.question, self.start, shares)?;
        Ok(SimulatedPanel { panel, latent })
    }
}

/// Seeded synthetic panel; see [`ShareSimulation`] for the generating process.
pub fn simulate_share_panel(
    seed: u64,
    months: usize,
    categories: usize,
    persistence: f64,
    concentration: f64,
) -> Result<SurveyPanel, IngestError> {
    Ok(ShareSimulation::new(seed, months, categories, persistence, concentration).run()?.panel)
}

fn softmax_with_reference(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(0.0_f64, f64::max);
    let mut out: Vec<f64> = logits.iter().map(|x| (x - max).exp()).collect();
    out.push((-max).exp());
    let total: f64 = out.iter().sum();
    out.iter_mut().for_each(|v| *v /= total);
    out
}

/// Dirichlet draw with mean `mean` and total concentration `concentration`.
fn dirichlet<R: Rng>(rng: &mut R, mean: &[f64], concentration: f64) -> Result<Vec<f64>, IngestError> {
    let mut draws = Vec::with_capacity(mean.len());
    for &m in mean {
        let shape = m * concentration;
        let g = if shape > 0.0 {
            Gamma::new(shape, 1.0)
                .map_err(|e| IngestError::InvalidParameter(e.to_string()))?
                .sample(rng)
        } else {
            0.0
        };
        draws.push(g);
    }
    let total: f64 = draws.iter().sum();
    if total > 0.0 && total.is_finite() {
        draws.iter_mut().for_each(|g| *g /= total);
        return Ok(draws);
    }
    // Every gamma underflowed: the small-concentration limit puts all mass on
    // one category chosen with probability equal to its mean share.
    let u: f64 = rng.random();
    let mut acc = 0.0;
    let mut pick = mean.len() - 1;
    for (i, m) in mean.iter().enumerate() {
        acc += m;
        if u < acc {
            pick = i;
            break;
        }
    }
    let mut out = vec![0.0; mean.len()];
    out[pick] = 1.0;
    Ok(out)
}

/// Two-column data matrix (disagreement first, growth second) on common months.
#[derive(Debug, Clone, PartialEq)]
pub struct AlignedMatrix {
    pub start: Month,
    pub columns: Vec<String>,
    /// T x n, rows ordered by month.
    pub data: DMatrix<f64>,
}

impl AlignedMatrix {
    /// General constructor for any number of columns.
    pub fn new(start: Month, columns: Vec<String>, data: DMatrix<f64>) -> Result<Self, IngestError> {
        if columns.len() != data.ncols() {
            return Err(IngestError::WrongCategoryCount { expected: columns.len(), found: data.ncols() });
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(IngestError::Malformed("non-finite cell in aligned data".into()));
        }
        Ok(AlignedMatrix { start, columns, data })
    }

    pub fn rows(&self) -> usize {
        self.data.nrows()
    }

    pub fn dates(&self) -> impl Iterator<Item = Month> + '_ {
        (0..self.data.nrows()).map(move |i| self.start.offset(i as i64))
    }
}

/// Intersects a monthly disagreement series with monthly growth.
pub fn join_for_var(disagreement: &MonthlySeries, growth: &MacroSeries) -> Result<AlignedMatrix, IngestError> {
    let growth_monthly = growth.monthly().ok_or_else(|| IngestError::NotMonthly(growth.country.clone()))?;
    let (from, to) = disagreement.overlap(&growth_monthly).ok_or(IngestError::EmptyOverlap)?;
    let d = disagreement.window(from, to).ok_or(IngestError::EmptyOverlap)?;
    let g = growth_monthly.window(from, to).ok_or(IngestError::EmptyOverlap)?;
    let data = DMatrix::from_fn(d.len(), 2, |i, j| if j == 0 { d[i] } else { g[i] });
    AlignedMatrix::new(from, vec!["disagreement".into(), "growth".into()], data)
}
