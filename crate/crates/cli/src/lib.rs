//! Command-line front end for `recloop`: parse a scenario document, run it,
//! and write CSV and JSON results.

pub mod config;
pub mod output;
pub mod scenario;

use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::Parser;

pub use config::{default_config, parse_config, parse_config_as, Scenario, ScenarioConfig, ScenarioKind};
pub use output::write_output;
pub use scenario::{execute, OutputFile, ScenarioOutput};

#[derive(Debug, Clone, Parser)]
#[command(name = "recloop", version, about = "Run recommender feedback-loop simulations")]
pub struct Args {
    /// Scenario document (TOML).
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Scenario to run; must match the document's `scenario` if both are given.
    #[arg(long, value_enum)]
    pub scenario: Option<ScenarioKind>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Override the number of replications.
    #[arg(long)]
    pub reps: Option<usize>,
    /// Override the horizon.
    #[arg(long)]
    pub horizon: Option<u64>,
    /// Print the resolved config and exit.
    #[arg(long)]
    pub dry_run: bool,
}

/// Resolve the config described by `args`.
pub fn resolve(args: &Args) -> Result<ScenarioConfig> {
    let mut config = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
            parse_config_as(&text, args.scenario).with_context(|| format!("in {}", path.display()))?
        }
        None => default_config(args.scenario.unwrap_or_default())?,
    };
    config.override_with(args.seed, args.out.clone(), args.reps, args.horizon)?;
    Ok(config)
}

/// Resolve, run, and write. Returns the written paths.
pub fn run(args: &Args) -> Result<Vec<PathBuf>> {
    let config = resolve(args)?;
    if args.dry_run {
        print!("{}", config.to_toml()?);
        return Ok(Vec::new());
    }
    log::info!("running {:?} with seed {}", config.scenario.kind(), config.seed);
    let output = execute(&config)?;
    write_output(&config.output_dir, &output)
}
