use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use disagreement_cli::config::{Overrides, PipelineConfig};
use disagreement_cli::error::CliError;
use disagreement_cli::fixture::{self, FixtureSpec};
use disagreement_cli::pipeline::{self, RunReport};

#[derive(Parser)]
#[command(name = "disagreement", version, about = "Survey disagreement indices and BVAR impulse responses")]
struct Cli {
    /// Pipeline configuration (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Countries processed concurrently.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Comma-separated country codes.
    #[arg(long, global = true, value_delimiter = ',')]
    countries: Option<Vec<String>>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Per-question indicators and DB/DC aggregates.
    Indicators,
    /// Mean, SD and GDP-growth correlation per country and agent.
    Table1,
    /// DB vs lagged DC cross-correlograms.
    Ccf {
        /// Largest lag K; overrides `ccf.max_lag`.
        #[arg(long)]
        max_lag: Option<usize>,
    },
    /// BVAR impulse responses of GDP growth to disagreement shocks.
    Irf,
    /// All stages followed by the run manifest.
    Pipeline,
    /// Writes a seeded synthetic fixture and its config into `--out`.
    Simulate,
    /// Prints the resolved configuration with every default filled in.
    PrintConfig,
}

fn overrides(cli: &Cli) -> Overrides {
    Overrides { seed: cli.seed, jobs: cli.jobs, out: cli.out.clone(), countries: cli.countries.clone() }
}

fn load(cli: &Cli) -> Result<PipelineConfig, CliError> {
    let path = cli.config.as_ref().ok_or_else(|| CliError::Config("--config is required".into()))?;
    PipelineConfig::load(path, &overrides(cli))
}

fn report(result: RunReport) -> i32 {
    for (stage, countries) in &result.manifest.stages {
        for (country, status) in countries {
            if let Some(err) = &status.error {
                eprintln!("{stage} {country}: {err}");
            }
        }
    }
    eprintln!("wrote {} files", result.manifest.outputs.len());
    result.exit_code()
}

fn execute(cli: Cli) -> Result<i32, CliError> {
    match &cli.command {
        Command::PrintConfig => {
            let config = match &cli.config {
                Some(_) => load(&cli)?,
                None => {
                    let mut c = PipelineConfig::default();
                    c.apply(&overrides(&cli));
                    c
                }
            };
            print!("{}", config.to_toml());
            Ok(0)
        }
        Command::Simulate => {
            let mut spec = FixtureSpec::default();
            if let Some(seed) = cli.seed {
                spec.seed = seed;
            }
            if let Some(countries) = &cli.countries {
                spec.countries = countries.clone();
            }
            let dir = cli.out.clone().unwrap_or_else(|| PathBuf::from("fixture"));
            let fixture = fixture::build(&spec)?;
            for path in fixture::write(&fixture, &spec, &dir)? {
                println!("{}", path.display());
            }
            Ok(0)
        }
        Command::Indicators => Ok(report(pipeline::cmd_indicators(&load(&cli)?)?)),
        Command::Table1 => Ok(report(pipeline::cmd_table1(&load(&cli)?)?)),
        Command::Ccf { max_lag } => {
            let mut config = load(&cli)?;
            if let Some(k) = max_lag {
                config.ccf.max_lag = *k;
            }
            Ok(report(pipeline::cmd_ccf(&config)?))
        }
        Command::Irf => Ok(report(pipeline::cmd_irf(&load(&cli)?)?)),
        Command::Pipeline => Ok(report(pipeline::cmd_pipeline(&load(&cli)?)?)),
    }
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
