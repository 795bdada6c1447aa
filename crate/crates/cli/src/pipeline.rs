//! Per-country pipeline: indicators, summary table, correlograms and IRFs.
//!
//! Workers compute each country's outputs in memory from immutable inputs and
//! hand back file contents; only the orchestrator touches the output directory.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::time::Instant;

use disagreement::bvar::{
    ar1_scales, bic_select, hc_se, irf_bands, minnesota_posterior, ols_var, spectral_radius, IrfBundle, VarSpec,
};
use disagreement::indicators::{
    aggregate, indicator_series, write_aggregate_csv, write_indicator_csv, AggregateDisagreement,
};
use disagreement::ingest::{
    align_frequency, join_for_var, parse_macro_csv, parse_survey_csv, Agent, Frequency, MacroSeries, SurveyPanel,
    SurveySchema,
};
use disagreement::stats::{cross_correlogram, pearson, summary, write_correlogram_csv, CrossCorrelogram};
use disagreement::MonthlySeries;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{PipelineConfig, TransformName};
use crate::derive_seed;
use crate::error::CliError;
use crate::output::write_atomic;
use crate::svg;

pub const MANIFEST: &str = "manifest.json";
pub const TABLE1: &str = "table1.csv";
pub const GROWTH_LABEL: &str = "gdp_growth";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Stage {
    Indicators,
    Table1,
    Ccf,
    Irf,
}

impl Stage {
    pub const ALL: [Stage; 4] = [Stage::Indicators, Stage::Table1, Stage::Ccf, Stage::Irf];

    pub fn as_str(self) -> &'static str {
        match self {
            Stage::Indicators => "indicators",
            Stage::Table1 => "table1",
            Stage::Ccf => "ccf",
            Stage::Irf => "irf",
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct CountryInput {
    pub panels: Vec<SurveyPanel>,
    /// Monthly growth after frequency alignment.
    pub growth: Option<MacroSeries>,
}

/// Reads every input file and groups the panels by country.
pub fn load_inputs(config: &PipelineConfig) -> Result<BTreeMap<String, CountryInput>, CliError> {
    let mut schema = SurveySchema::new(config.share_unit());
    schema.tolerance = config.input.tolerance;
    let mut countries: BTreeMap<String, CountryInput> = BTreeMap::new();
    for path in &config.input.survey {
        let file = File::open(path).map_err(|e| CliError::io(path, e))?;
        let panels = parse_survey_csv(file, &schema)
            .map_err(|e| CliError::Input { path: path.clone(), message: e.to_string() })?;
        for panel in panels {
            let panel = if config.input.collapse_consumer && panel.agent == Agent::Consumer && panel.categories() == 6
            {
                panel
                    .collapse_consumer()
                    .map_err(|e| CliError::Input { path: path.clone(), message: e.to_string() })?
            } else {
                panel
            };
            countries.entry(panel.country.clone()).or_default().panels.push(panel);
        }
    }
    let path = &config.input.macro_path;
    let file = File::open(path).map_err(|e| CliError::io(path, e))?;
    let series = parse_macro_csv(file).map_err(|e| CliError::Input { path: path.clone(), message: e.to_string() })?;
    for s in series {
        let monthly = match s.frequency {
            Frequency::Monthly => s,
            Frequency::Quarterly => align_frequency(&s, config.alignment())
                .map_err(|e| CliError::Input { path: path.clone(), message: format!("{}: {e}", s.country) })?,
        };
        let country = monthly.country.clone();
        countries.entry(country).or_default().growth = Some(monthly);
    }
    Ok(countries)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table1Row {
    pub country: String,
    pub agent: Agent,
    pub label: &'static str,
    pub mean: f64,
    pub sd: f64,
    pub corr_with_growth: f64,
    pub overlap: usize,
}

/// One (country, disagreement) model with its IRFs.
#[derive(Debug, Clone)]
pub struct AgentModel {
    pub agent: Agent,
    pub label: &'static str,
    pub lags: usize,
    pub bic: f64,
    pub spectral_radius: f64,
    pub observations: usize,
    pub ols: Vec<Vec<f64>>,
    pub hc0: Vec<Vec<f64>>,
    pub posterior_mean: Vec<Vec<f64>>,
    pub posterior_sd: Vec<Vec<f64>>,
    pub bands: IrfBundle,
}

#[derive(Debug, Clone, Default)]
pub struct CountryRun {
    pub country: String,
    pub files: Vec<(String, Vec<u8>)>,
    pub table1: Vec<Table1Row>,
    pub status: BTreeMap<Stage, Result<(), String>>,
    pub millis: BTreeMap<Stage, f64>,
}

type Files = Vec<(String, Vec<u8>)>;

fn csv_writer(buf: &mut Vec<u8>) -> csv::Writer<&mut Vec<u8>> {
    csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(buf)
}

fn agent_aggregates(
    config: &PipelineConfig,
    country: &str,
    input: &CountryInput,
) -> Result<(Vec<AggregateDisagreement>, Files), String> {
    if input.panels.is_empty() {
        return Err(format!("no survey data for {country}"));
    }
    let mut aggregates = Vec::new();
    let mut files = Vec::new();
    for agent in Agent::ALL {
        let mut panels: Vec<&SurveyPanel> = input.panels.iter().filter(|p| p.agent == agent).collect();
        if panels.is_empty() {
            continue;
        }
        panels.sort_by_key(|p| p.question);
        let series = panels
            .iter()
            .map(|p| indicator_series(p, config.metric()).map_err(|e| format!("{agent} {}: {e}", p.question)))
            .collect::<Result<Vec<_>, _>>()?;
        let agg = aggregate(&series).map_err(|e| format!("{agent}: {e}"))?;
        for s in &series {
            let mut buf = Vec::new();
            write_indicator_csv(&[s], &mut buf).map_err(|e| e.to_string())?;
            files.push((format!("indicators/{country}_{agent}_{}.csv", s.question), buf));
        }
        let mut buf = Vec::new();
        write_aggregate_csv(&agg, &mut buf).map_err(|e| e.to_string())?;
        files.push((format!("indicators/{country}_{}.csv", agg.label()), buf));
        aggregates.push(agg);
    }
    Ok((aggregates, files))
}

fn growth<'a>(country: &str, input: &'a CountryInput) -> Result<&'a MacroSeries, String> {
    input.growth.as_ref().ok_or_else(|| format!("no GDP growth series for {country}"))
}

fn table1_rows(country: &str, aggregates: &[AggregateDisagreement], input: &CountryInput) -> Result<Vec<Table1Row>, String> {
    let growth = growth(country, input)?;
    aggregates
        .iter()
        .map(|agg| {
            let s = summary(agg.label(), &agg.series.values).map_err(|e| format!("{}: {e}", agg.label()))?;
            let joined = join_for_var(&agg.series, growth).map_err(|e| format!("{} vs GDP growth: {e}", agg.label()))?;
            let d: Vec<f64> = joined.data.column(0).iter().copied().collect();
            let g: Vec<f64> = joined.data.column(1).iter().copied().collect();
            let corr = pearson(&d, &g).map_err(|e| format!("{} vs GDP growth: {e}", agg.label()))?;
            Ok(Table1Row {
                country: country.to_string(),
                agent: agg.agent,
                label: agg.label(),
                mean: s.mean,
                sd: s.sd,
                corr_with_growth: corr,
                overlap: d.len(),
            })
        })
        .collect()
}

pub fn write_table1<W: std::io::Write>(rows: &[Table1Row], writer: W) -> Result<(), csv::Error> {
    let mut out = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(writer);
    out.write_record(["country", "agent", "indicator", "mean", "sd", "corr_with_gdp_growth", "n_overlap"])?;
    for r in rows {
        out.write_record([
            r.country.clone(),
            r.agent.to_string(),
            r.label.to_string(),
            r.mean.to_string(),
            r.sd.to_string(),
            r.corr_with_growth.to_string(),
            r.overlap.to_string(),
        ])?;
    }
    out.flush()?;
    Ok(())
}

/// Business against consumer disagreement on their common months.
pub fn correlogram(aggregates: &[AggregateDisagreement], max_lag: usize) -> Result<CrossCorrelogram, String> {
    let find = |agent| {
        aggregates
            .iter()
            .find(|a| a.agent == agent)
            .ok_or_else(|| format!("correlogram needs both DB and DC; {} missing", agent_label(agent)))
    };
    let (db, dc) = (find(Agent::Business)?, find(Agent::Consumer)?);
    let (from, to) = db.series.overlap(&dc.series).ok_or("DB and DC do not overlap")?;
    let a = db.series.window(from, to).ok_or("DB and DC do not overlap")?;
    let b = dc.series.window(from, to).ok_or("DB and DC do not overlap")?;
    cross_correlogram(a, b, max_lag).map_err(|e| e.to_string())
}

fn agent_label(agent: Agent) -> &'static str {
    agent.aggregate_label()
}

fn ccf_files(country: &str, ccf: &CrossCorrelogram) -> Result<Files, String> {
    let mut buf = Vec::new();
    write_correlogram_csv(&[(country, ccf)], &mut buf).map_err(|e| e.to_string())?;
    let plot = svg::correlogram(country, "DB", "DC", ccf);
    Ok(vec![(format!("ccf/{country}.csv"), buf), (format!("ccf/{country}.svg"), plot.into_bytes())])
}

fn fit_model(config: &PipelineConfig, country: &str, agg: &AggregateDisagreement, growth: &MacroSeries) -> Result<AgentModel, String> {
    let label = agg.label();
    let context = |e: &dyn std::fmt::Display| format!("{label} model: {e}");
    let series: MonthlySeries = match config.var.disagreement_transform {
        TransformName::Levels => agg.series.clone(),
        TransformName::Diff => agg.series.diff(),
    };
    let aligned = join_for_var(&series, growth).map_err(|e| context(&e))?;
    let data = &aligned.data;
    let selection = bic_select(data, config.var.pmax, config.var.intercept).map_err(|e| context(&e))?;
    let spec = VarSpec::new(selection.lags, config.var.intercept).map_err(|e| context(&e))?;
    let est = ols_var(data, spec).map_err(|e| context(&e))?;
    let hc0 = hc_se(&est).map_err(|e| context(&e))?;
    let hyper = config.hyper(ar1_scales(data).map_err(|e| context(&e))?);
    let posterior = minnesota_posterior(data, spec, &hyper).map_err(|e| context(&e))?;
    let radius = spectral_radius(&posterior.mean_coefficients()).map_err(|e| context(&e))?;
    let seed = derive_seed(&[&config.run.seed.to_string(), country, agg.agent.as_str()]);
    let bands = irf_bands(&posterior, &config.band_settings(2, seed)).map_err(|e| context(&e))?;
    let n = est.n();
    Ok(AgentModel {
        agent: agg.agent,
        label,
        lags: selection.lags,
        bic: selection.criteria[selection.lags - 1],
        spectral_radius: radius,
        observations: aligned.rows(),
        ols: (0..n).map(|i| est.stacked.column(i).iter().copied().collect()).collect(),
        hc0: hc0.iter().map(|v| v.iter().copied().collect()).collect(),
        posterior_mean: posterior.equations.iter().map(|e| e.mean.iter().copied().collect()).collect(),
        posterior_sd: posterior
            .equations
            .iter()
            .map(|e| e.covariance.diagonal().iter().map(|v| v.max(0.0).sqrt()).collect())
            .collect(),
        bands,
    })
}

fn regressor_names(label: &str, lags: usize, intercept: bool) -> Vec<String> {
    let mut names = Vec::new();
    if intercept {
        names.push("const".to_string());
    }
    for l in 1..=lags {
        names.push(format!("{label}.l{l}"));
        names.push(format!("{GROWTH_LABEL}.l{l}"));
    }
    names
}

fn irf_files(config: &PipelineConfig, country: &str, models: &[AgentModel]) -> Result<Files, String> {
    let mut irf = Vec::new();
    {
        let mut out = csv_writer(&mut irf);
        let map = |e: csv::Error| e.to_string();
        out.write_record(["country", "agent", "shock", "response_variable", "horizon", "point", "lower", "upper"])
            .map_err(map)?;
        for m in models {
            let names = [m.label, GROWTH_LABEL];
            for shock in 0..2 {
                for var in 0..2 {
                    for h in 0..=m.bands.horizon {
                        out.write_record([
                            country.to_string(),
                            m.agent.to_string(),
                            names[shock].to_string(),
                            names[var].to_string(),
                            h.to_string(),
                            m.bands.point.get(var, shock, h).to_string(),
                            m.bands.lower.get(var, shock, h).to_string(),
                            m.bands.upper.get(var, shock, h).to_string(),
                        ])
                        .map_err(map)?;
                    }
                }
            }
        }
        out.flush().map_err(|e| e.to_string())?;
    }

    let mut models_csv = Vec::new();
    {
        let mut out = csv_writer(&mut models_csv);
        let map = |e: csv::Error| e.to_string();
        out.write_record([
            "country",
            "agent",
            "lags",
            "bic",
            "observations",
            "spectral_radius",
            "draws",
            "rejected_explosive",
            "equation",
            "regressor",
            "ols",
            "hc0_se",
            "posterior_mean",
            "posterior_sd",
        ])
        .map_err(map)?;
        for m in models {
            let names = [m.label, GROWTH_LABEL];
            let regressors = regressor_names(m.label, m.lags, config.var.intercept);
            for (eq, name) in names.iter().enumerate() {
                for (r, reg) in regressors.iter().enumerate() {
                    out.write_record([
                        country.to_string(),
                        m.agent.to_string(),
                        m.lags.to_string(),
                        m.bic.to_string(),
                        m.observations.to_string(),
                        m.spectral_radius.to_string(),
                        m.bands.draws.to_string(),
                        m.bands.rejected_explosive.to_string(),
                        name.to_string(),
                        reg.clone(),
                        m.ols[eq][r].to_string(),
                        m.hc0[eq][r].to_string(),
                        m.posterior_mean[eq][r].to_string(),
                        m.posterior_sd[eq][r].to_string(),
                    ])
                    .map_err(map)?;
                }
            }
        }
        out.flush().map_err(|e| e.to_string())?;
    }

    let paths: Vec<(String, [Vec<f64>; 3])> = models
        .iter()
        .map(|m| {
            let path = |r: &disagreement::bvar::ImpulseResponse| r.path(1, 0);
            (format!("{} shock", m.label), [path(&m.bands.point), path(&m.bands.lower), path(&m.bands.upper)])
        })
        .collect();
    let banded: Vec<svg::BandedPath<'_>> = paths
        .iter()
        .map(|(label, [p, l, u])| svg::BandedPath { label, point: p, lower: l, upper: u })
        .collect();
    let [lo, hi] = config.var.quantiles;
    let plot = svg::impulse_responses(
        &format!("{country}: response of GDP growth to disagreement shocks"),
        &format!("Cholesky, disagreement ordered first; bands at quantiles {lo} and {hi}"),
        &banded,
    );
    Ok(vec![
        (format!("irf/{country}.csv"), irf),
        (format!("irf/{country}_models.csv"), models_csv),
        (format!("irf/{country}.svg"), plot.into_bytes()),
    ])
}

/// Runs the requested stages for one country without touching the filesystem.
pub fn run_country(config: &PipelineConfig, country: &str, input: &CountryInput, stages: &BTreeSet<Stage>) -> CountryRun {
    let mut run = CountryRun { country: country.to_string(), ..CountryRun::default() };
    let clock = Instant::now();
    let base = agent_aggregates(config, country, input);
    let elapsed = |t: Instant| t.elapsed().as_secs_f64() * 1e3;
    if stages.contains(&Stage::Indicators) {
        run.millis.insert(Stage::Indicators, elapsed(clock));
        match &base {
            Ok((_, files)) => {
                run.files.extend(files.iter().cloned());
                run.status.insert(Stage::Indicators, Ok(()));
            }
            Err(e) => {
                run.status.insert(Stage::Indicators, Err(e.clone()));
            }
        }
    }
    let aggregates = base.as_ref().map(|(a, _)| a).map_err(|e| format!("indicators unavailable: {e}"));

    if stages.contains(&Stage::Table1) {
        let clock = Instant::now();
        let result = aggregates.clone().and_then(|a| table1_rows(country, a, input));
        run.millis.insert(Stage::Table1, elapsed(clock));
        run.status.insert(Stage::Table1, result.map(|rows| run.table1 = rows));
    }
    if stages.contains(&Stage::Ccf) {
        let clock = Instant::now();
        let result = aggregates
            .clone()
            .and_then(|a| correlogram(a, config.ccf.max_lag))
            .and_then(|ccf| ccf_files(country, &ccf));
        run.millis.insert(Stage::Ccf, elapsed(clock));
        run.status.insert(Stage::Ccf, result.map(|files| run.files.extend(files)));
    }
    if stages.contains(&Stage::Irf) {
        let clock = Instant::now();
        let result = aggregates.clone().and_then(|aggs| {
            let growth = growth(country, input)?;
            let models = aggs.iter().map(|a| fit_model(config, country, a, growth)).collect::<Result<Vec<_>, _>>()?;
            irf_files(config, country, &models)
        });
        run.millis.insert(Stage::Irf, elapsed(clock));
        run.status.insert(Stage::Irf, result.map(|files| run.files.extend(files)));
    }
    run
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageStatus {
    pub ok: bool,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub error: Option<String>,
    pub millis: f64,
}

/// Record of one run. Everything except the timings is deterministic.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub version: String,
    pub command: String,
    pub config_hash: String,
    /// Resolved configuration as TOML; loading it reproduces the run.
    pub config: String,
    pub ccf_convention: String,
    /// stage -> country -> status
    pub stages: BTreeMap<String, BTreeMap<String, StageStatus>>,
    pub total_millis: f64,
    /// Paths relative to the output directory, sorted; the manifest itself is not listed.
    pub outputs: Vec<String>,
}

impl RunManifest {
    pub fn failures(&self) -> usize {
        self.stages.values().flat_map(|m| m.values()).filter(|s| !s.ok).count()
    }
}

/// Result of [`run`]: the manifest plus whether it was written to disk.
#[derive(Debug, Clone)]
pub struct RunReport {
    pub manifest: RunManifest,
}

impl RunReport {
    pub fn exit_code(&self) -> i32 {
        if self.manifest.failures() == 0 {
            crate::error::EXIT_OK
        } else {
            crate::error::EXIT_PARTIAL
        }
    }
}

fn selected_countries(config: &PipelineConfig, inputs: &BTreeMap<String, CountryInput>) -> BTreeSet<String> {
    if config.run.countries.is_empty() {
        inputs.iter().filter(|(_, i)| !i.panels.is_empty()).map(|(c, _)| c.clone()).collect()
    } else {
        config.run.countries.iter().cloned().collect()
    }
}

/// Runs `stages` for every selected country and writes their outputs.
pub fn run(config: &PipelineConfig, stages: &[Stage], command: &str, write_manifest: bool) -> Result<RunReport, CliError> {
    let clock = Instant::now();
    let stages: BTreeSet<Stage> = stages.iter().copied().collect();
    let inputs = load_inputs(config)?;
    let countries: Vec<String> = selected_countries(config, &inputs).into_iter().collect();
    let empty = CountryInput::default();

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.run.jobs)
        .build()
        .map_err(|e| CliError::Config(format!("thread pool: {e}")))?;
    let runs: Vec<CountryRun> = pool.install(|| {
        countries
            .par_iter()
            .map(|c| run_country(config, c, inputs.get(c).unwrap_or(&empty), &stages))
            .collect()
    });

    let mut files: BTreeMap<String, Vec<u8>> = BTreeMap::new();
    let mut status: BTreeMap<String, BTreeMap<String, StageStatus>> = BTreeMap::new();
    let mut table1 = Vec::new();
    for run in runs {
        for (stage, result) in &run.status {
            let entry = StageStatus {
                ok: result.is_ok(),
                error: result.as_ref().err().cloned(),
                millis: run.millis.get(stage).copied().unwrap_or(0.0),
            };
            status.entry(stage.as_str().to_string()).or_default().insert(run.country.clone(), entry);
        }
        table1.extend(run.table1);
        files.extend(run.files);
    }
    if stages.contains(&Stage::Table1) {
        let mut buf = Vec::new();
        write_table1(&table1, &mut buf).map_err(|e| CliError::Config(e.to_string()))?;
        files.insert(TABLE1.to_string(), buf);
    }

    let out = &config.run.out;
    for (rel, bytes) in &files {
        write_atomic(&out.join(rel), bytes)?;
    }
    let manifest = RunManifest {
        version: env!("CARGO_PKG_VERSION").to_string(),
        command: command.to_string(),
        config_hash: config.hash(),
        config: config.to_toml(),
        ccf_convention: format!("{} with A = DB, B = DC", CrossCorrelogram::CONVENTION),
        stages: status,
        total_millis: clock.elapsed().as_secs_f64() * 1e3,
        outputs: files.keys().cloned().collect(),
    };
    if write_manifest {
        let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
        write_atomic(&out.join(MANIFEST), format!("{text}\n").as_bytes())?;
    }
    Ok(RunReport { manifest })
}

pub fn cmd_indicators(config: &PipelineConfig) -> Result<RunReport, CliError> {
    run(config, &[Stage::Indicators], "indicators", false)
}

pub fn cmd_table1(config: &PipelineConfig) -> Result<RunReport, CliError> {
    run(config, &[Stage::Table1], "table1", false)
}

pub fn cmd_ccf(config: &PipelineConfig) -> Result<RunReport, CliError> {
    run(config, &[Stage::Ccf], "ccf", false)
}

pub fn cmd_irf(config: &PipelineConfig) -> Result<RunReport, CliError> {
    run(config, &[Stage::Irf], "irf", false)
}

pub fn cmd_pipeline(config: &PipelineConfig) -> Result<RunReport, CliError> {
    run(config, &Stage::ALL, "pipeline", true)
}
