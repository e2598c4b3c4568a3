//! `synthctl`: synthetic control studies from a TOML config.
//!
//! Subcommands write CSV tables plus `summary.json` and `manifest.json`
//! into `--out`. Exit codes: 0 ok, 2 config error, 3 data error,
//! 4 estimation failure.

pub mod commands;
pub mod config;
pub mod error;
pub mod manifest;
pub mod output;
pub mod tables;

use clap::{Args, Parser, Subcommand};
use std::path::PathBuf;

pub use error::CliError;

#[derive(Debug, Parser)]
#[command(name = "synthctl", version, about = "Synthetic control estimation and placebo inference")]
pub struct Cli {
    /// Study config (TOML).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Overrides the solver seed (fit, placebo) or generator seed
    /// (simulate, power).
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,
    /// Worker threads, 0 = one per core.
    #[arg(long, global = true, default_value_t = 0)]
    pub threads: usize,
    #[arg(long, short, global = true)]
    pub verbose: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Aggregate survey microdata into a status-completion-rate panel.
    Aggregate(AggregateArgs),
    /// Fit the synthetic control for the configured treated unit.
    Fit,
    /// Run the in-space placebo study.
    Placebo,
    /// Generate a factor-model panel with known ground truth.
    Simulate,
    /// Size/power study of the placebo test on simulated panels.
    Power {
        #[arg(long)]
        replications: Option<usize>,
    },
    /// Print the tables of a finished run.
    Report {
        /// Run directory, defaults to --out.
        dir: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, Args)]
pub struct AggregateArgs {
    /// CSV with columns unit,time,age,has_credential,weight.
    #[arg(long)]
    pub input: PathBuf,
    /// Comma-separated unit labels; default: every unit in the input.
    #[arg(long, value_delimiter = ',')]
    pub units: Option<Vec<String>>,
    /// Time range `first:last`; default: the span of the input.
    #[arg(long)]
    pub times: Option<String>,
    #[arg(long, default_value_t = 18)]
    pub min_age: u32,
    #[arg(long, default_value_t = 24)]
    pub max_age: u32,
}

pub fn run(cli: &Cli) -> Result<(), CliError> {
    match &cli.command {
        Command::Aggregate(args) => commands::aggregate::run(cli, args),
        Command::Fit => commands::fit::run(cli),
        Command::Placebo => commands::placebo::run(cli),
        Command::Simulate => commands::simulate::run(cli),
        Command::Power { replications } => commands::power::run(cli, *replications),
        Command::Report { dir } => commands::report::run(dir.as_deref().unwrap_or(&cli.out)),
    }
}
