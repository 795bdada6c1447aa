//! Pipeline configuration.
//!
//! The configuration is a TOML file with dotted sections. Every key has a
//! default, and `print-config` prints the full resolved configuration.
//! Relative input and output paths resolve against the config file's directory.

use std::path::{Path, PathBuf};

use disagreement::bvar::{BandSettings, MinnesotaHyper, StabilityRule};
use disagreement::indicators::Metric;
use disagreement::ingest::{Alignment, ShareUnit};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub input: InputConfig,
    pub run: RunConfig,
    pub var: VarConfig,
    pub minnesota: MinnesotaConfig,
    pub ccf: CcfConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum UnitName {
    #[default]
    Percent,
    Fraction,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InputConfig {
    /// Survey tables; each file has a single category layout.
    pub survey: Vec<PathBuf>,
    #[serde(rename = "macro")]
    pub macro_path: PathBuf,
    pub share_unit: UnitName,
    pub tolerance: f64,
    /// Fold six-category consumer answers into three before computing indicators.
    pub collapse_consumer: bool,
}

impl Default for InputConfig {
    fn default() -> Self {
        InputConfig {
            survey: vec![PathBuf::from("business.csv"), PathBuf::from("consumer.csv")],
            macro_path: PathBuf::from("gdp.csv"),
            share_unit: UnitName::Percent,
            tolerance: disagreement::ingest::DEFAULT_TOLERANCE,
            collapse_consumer: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum MetricName {
    #[default]
    D,
    #[serde(rename = "DISP")]
    Disp,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum AlignmentName {
    #[default]
    Step,
    Linear,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Empty means every country found in the inputs.
    pub countries: Vec<String>,
    pub metric: MetricName,
    pub alignment: AlignmentName,
    pub seed: u64,
    pub jobs: usize,
    pub out: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            countries: Vec::new(),
            metric: MetricName::D,
            alignment: AlignmentName::Step,
            seed: 20_171_231,
            jobs: 1,
            out: PathBuf::from("out"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum StabilityName {
    Keep,
    #[default]
    Reject,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum TransformName {
    #[default]
    Levels,
    Diff,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VarConfig {
    pub pmax: usize,
    pub intercept: bool,
    pub horizon: usize,
    pub draws: usize,
    pub quantiles: [f64; 2],
    pub stability: StabilityName,
    /// Applied to the disagreement series before it enters the VAR.
    pub disagreement_transform: TransformName,
}

impl Default for VarConfig {
    fn default() -> Self {
        VarConfig {
            pmax: 12,
            intercept: true,
            horizon: 24,
            draws: 1000,
            quantiles: [0.16, 0.84],
            stability: StabilityName::Reject,
            disagreement_transform: TransformName::Levels,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MinnesotaConfig {
    pub delta: f64,
    pub lambda1: f64,
    pub lambda2: f64,
    pub lambda3: f64,
    pub lambda4: f64,
}

impl Default for MinnesotaConfig {
    fn default() -> Self {
        MinnesotaConfig {
            delta: MinnesotaHyper::DEFAULT_DELTA,
            lambda1: MinnesotaHyper::DEFAULT_LAMBDA1,
            lambda2: MinnesotaHyper::DEFAULT_LAMBDA2,
            lambda3: MinnesotaHyper::DEFAULT_LAMBDA3,
            lambda4: MinnesotaHyper::DEFAULT_LAMBDA4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CcfConfig {
    pub max_lag: usize,
}

impl Default for CcfConfig {
    fn default() -> Self {
        CcfConfig { max_lag: 12 }
    }
}

/// Command-line overrides applied on top of the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub jobs: Option<usize>,
    pub out: Option<PathBuf>,
    pub countries: Option<Vec<String>>,
}

impl PipelineConfig {
    /// Reads a config file, applies overrides, resolves paths and validates.
    pub fn load(path: &Path, overrides: &Overrides) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let mut config = Self::from_toml(&text)?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        config.apply(overrides);
        config.resolve_paths(&base);
        config.validate()?;
        Ok(config)
    }

    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn apply(&mut self, overrides: &Overrides) {
        if let Some(seed) = overrides.seed {
            self.run.seed = seed;
        }
        if let Some(jobs) = overrides.jobs {
            self.run.jobs = jobs;
        }
        if let Some(out) = &overrides.out {
            self.run.out = out.clone();
        }
        if let Some(countries) = &overrides.countries {
            self.run.countries = countries.clone();
        }
    }

    fn resolve_paths(&mut self, base: &Path) {
        let resolve = |p: &Path| {
            let joined = if p.is_absolute() { p.to_path_buf() } else { base.join(p) };
            std::path::absolute(&joined).unwrap_or(joined)
        };
        self.input.survey = self.input.survey.iter().map(|p| resolve(p)).collect();
        self.input.macro_path = resolve(&self.input.macro_path);
        self.run.out = resolve(&self.run.out);
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |m: String| Err(CliError::Config(m));
        if self.var.horizon < 1 {
            return bad("var.horizon must be at least 1".into());
        }
        if self.var.draws < 100 {
            return bad(format!("var.draws must be at least 100, got {}", self.var.draws));
        }
        let [lo, hi] = self.var.quantiles;
        if !(0.0 < lo && lo < hi && hi < 1.0) {
            return bad(format!("var.quantiles must satisfy 0 < lower < upper < 1, got [{lo}, {hi}]"));
        }
        if self.var.pmax < 1 {
            return bad("var.pmax must be at least 1".into());
        }
        if self.run.jobs < 1 {
            return bad("run.jobs must be at least 1".into());
        }
        if !(self.input.tolerance >= 0.0) {
            return bad("input.tolerance must be nonnegative".into());
        }
        let m = &self.minnesota;
        if !(m.lambda1 > 0.0 && m.lambda2 > 0.0 && m.lambda2 <= 1.0 && m.lambda3 >= 0.0 && m.lambda4 > 0.0) {
            return bad("minnesota: need lambda1 > 0, 0 < lambda2 <= 1, lambda3 >= 0, lambda4 > 0".into());
        }
        if self.input.survey.is_empty() {
            return bad("input.survey lists no files".into());
        }
        for p in self.input.survey.iter().chain(std::iter::once(&self.input.macro_path)) {
            if !p.is_file() {
                return bad(format!("input file {} does not exist", p.display()));
            }
        }
        Ok(())
    }

    /// SHA-256 of the resolved configuration text.
    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.to_toml().as_bytes()))
    }

    pub fn metric(&self) -> Metric {
        match self.run.metric {
            MetricName::D => Metric::D,
            MetricName::Disp => Metric::Disp,
        }
    }

    pub fn alignment(&self) -> Alignment {
        match self.run.alignment {
            AlignmentName::Step => Alignment::Step,
            AlignmentName::Linear => Alignment::Linear,
        }
    }

    pub fn share_unit(&self) -> ShareUnit {
        match self.input.share_unit {
            UnitName::Percent => ShareUnit::Percent,
            UnitName::Fraction => ShareUnit::Fraction,
        }
    }

    pub fn hyper(&self, scales: Vec<f64>) -> MinnesotaHyper {
        let m = &self.minnesota;
        MinnesotaHyper {
            delta: m.delta,
            lambda1: m.lambda1,
            lambda2: m.lambda2,
            lambda3: m.lambda3,
            lambda4: m.lambda4,
            scales,
        }
    }

    pub fn band_settings(&self, n: usize, seed: u64) -> BandSettings {
        BandSettings {
            horizon: self.var.horizon,
            draws: self.var.draws,
            seed,
            quantiles: (self.var.quantiles[0], self.var.quantiles[1]),
            stability: match self.var.stability {
                StabilityName::Keep => StabilityRule::Keep,
                StabilityName::Reject => StabilityRule::Reject,
            },
            ordering: (0..n).collect(),
        }
    }
}
