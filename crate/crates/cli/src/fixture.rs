//! Seeded synthetic inputs for exercising the pipeline end to end.
//!
//! Each country gets three business panels (three answer categories) and three
//! consumer panels (six categories) from the logistic-normal share generator,
//! plus quarterly GDP growth that responds to that country's disagreement.

use std::path::{Path, PathBuf};

use disagreement::indicators::{aggregate, indicator_series, Metric};
use disagreement::ingest::{
    write_macro_csv, write_survey_csv, Agent, Frequency, MacroSeries, Question, ShareSimulation, SurveyPanel,
};
use disagreement::Month;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::config::{PipelineConfig, UnitName};
use crate::error::CliError;
use crate::output::write_atomic;
use crate::derive_seed;

pub const BUSINESS_CATEGORIES: [&str; 3] = ["P", "E", "M"];
pub const CONSUMER_CATEGORIES: [&str; 6] = ["PP", "P", "E", "M", "MM", "N"];

const BUSINESS_CENTER: [f64; 3] = [0.25, 0.55, 0.20];
const CONSUMER_CENTER: [f64; 6] = [0.05, 0.25, 0.35, 0.20, 0.08, 0.07];

#[derive(Debug, Clone)]
pub struct FixtureSpec {
    pub seed: u64,
    pub countries: Vec<String>,
    /// First survey month; GDP starts at the beginning of that quarter.
    pub start: Month,
    pub months: usize,
    pub persistence: f64,
    pub concentration: f64,
}

impl Default for FixtureSpec {
    fn default() -> Self {
        FixtureSpec {
            seed: 2024,
            countries: vec!["AT".into(), "BE".into(), "DE".into()],
            start: Month::new(2005, 5).expect("valid month"),
            months: 152,
            persistence: 0.9,
            concentration: 150.0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Fixture {
    pub business: Vec<SurveyPanel>,
    pub consumer: Vec<SurveyPanel>,
    pub gdp: Vec<MacroSeries>,
}

fn simulate(spec: &FixtureSpec, country: &str, agent: Agent, question: Question) -> Result<SurveyPanel, CliError> {
    let center: &[f64] = match agent {
        Agent::Business => &BUSINESS_CENTER,
        Agent::Consumer => &CONSUMER_CENTER,
    };
    let seed = derive_seed(&[&spec.seed.to_string(), country, agent.as_str(), question.as_str()]);
    let mut sim = ShareSimulation::new(seed, spec.months, center.len(), spec.persistence, spec.concentration);
    sim.center = Some(center.to_vec());
    sim.start = spec.start;
    sim.country = country.to_string();
    sim.agent = agent;
    sim.question = question;
    sim.run().map(|s| s.panel).map_err(|e| CliError::Config(format!("fixture: {e}")))
}

/// Quarterly means of a monthly series, with missing months filled by the overall mean.
fn quarterly_means(values: &[f64], start: Month, first_quarter: Month, quarters: usize) -> Vec<f64> {
    let overall = values.iter().sum::<f64>() / values.len() as f64;
    (0..quarters)
        .map(|q| {
            let months: Vec<f64> = (0..3)
                .map(|m| {
                    let offset = first_quarter.offset((3 * q + m) as i64).ordinal() - start.ordinal();
                    usize::try_from(offset).ok().and_then(|i| values.get(i).copied()).unwrap_or(overall)
                })
                .collect();
            months.iter().sum::<f64>() / 3.0
        })
        .collect()
}

pub fn build(spec: &FixtureSpec) -> Result<Fixture, CliError> {
    let mut fixture = Fixture { business: Vec::new(), consumer: Vec::new(), gdp: Vec::new() };
    let first_quarter = spec.start.offset(-(((spec.start.month() - 1) % 3) as i64));
    let end = spec.start.offset(spec.months as i64 - 1);
    let quarters = (first_quarter.months_until(end) / 3 + 1) as usize;
    for country in &spec.countries {
        let mut aggregates = Vec::new();
        for agent in Agent::ALL {
            let panels = Question::ALL
                .iter()
                .map(|&q| simulate(spec, country, agent, q))
                .collect::<Result<Vec<_>, _>>()?;
            let series = panels
                .iter()
                .map(|p| {
                    let p = if agent == Agent::Consumer { p.collapse_consumer() } else { Ok(p.clone()) };
                    let p = p.map_err(|e| CliError::Config(format!("fixture: {e}")))?;
                    indicator_series(&p, Metric::D).map_err(|e| CliError::Config(format!("fixture: {e}")))
                })
                .collect::<Result<Vec<_>, _>>()?;
            let agg = aggregate(&series).map_err(|e| CliError::Config(format!("fixture: {e}")))?;
            aggregates.push(quarterly_means(&agg.series.values, spec.start, first_quarter, quarters));
            match agent {
                Agent::Business => fixture.business.extend(panels),
                Agent::Consumer => fixture.consumer.extend(panels),
            }
        }
        let centered: Vec<Vec<f64>> = aggregates
            .iter()
            .map(|s| {
                let m = s.iter().sum::<f64>() / s.len() as f64;
                s.iter().map(|v| v - m).collect()
            })
            .collect();
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(&[&spec.seed.to_string(), country, "gdp"]));
        let mut growth = Vec::with_capacity(quarters);
        let mut prev = 0.4;
        for q in 0..quarters {
            let shock: f64 = rng.sample(StandardNormal);
            let g = 0.2 + 0.5 * prev - 15.0 * centered[0][q] + 8.0 * centered[1][q] + 0.3 * shock;
            growth.push(g);
            prev = g;
        }
        fixture.gdp.push(MacroSeries {
            country: country.clone(),
            frequency: Frequency::Quarterly,
            start: first_quarter,
            values: growth,
        });
    }
    Ok(fixture)
}

/// Writes `business.csv`, `consumer.csv`, `gdp.csv` and a matching `config.toml`.
pub fn write(fixture: &Fixture, spec: &FixtureSpec, dir: &Path) -> Result<Vec<PathBuf>, CliError> {
    let render = |f: &dyn Fn(&mut Vec<u8>) -> Result<(), disagreement::ingest::IngestError>| {
        let mut buf = Vec::new();
        f(&mut buf).map_err(|e| CliError::Config(format!("fixture: {e}")))?;
        Ok::<_, CliError>(buf)
    };
    let business = render(&|b| write_survey_csv(&fixture.business, &BUSINESS_CATEGORIES, b))?;
    let consumer = render(&|b| write_survey_csv(&fixture.consumer, &CONSUMER_CATEGORIES, b))?;
    let gdp = render(&|b| write_macro_csv(&fixture.gdp, b))?;

    let mut config = PipelineConfig::default();
    config.input.survey = vec!["business.csv".into(), "consumer.csv".into()];
    config.input.macro_path = "gdp.csv".into();
    config.input.share_unit = UnitName::Fraction;
    config.run.countries = spec.countries.clone();
    config.run.seed = spec.seed;

    let files = [
        ("business.csv", business),
        ("consumer.csv", consumer),
        ("gdp.csv", gdp),
        ("config.toml", config.to_toml().into_bytes()),
    ];
    let mut written = Vec::new();
    for (name, bytes) in files {
        let path = dir.join(name);
        write_atomic(&path, &bytes)?;
        written.push(path);
    }
    Ok(written)
}
