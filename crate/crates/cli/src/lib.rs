//! Command-line pipeline: validate a country-year panel, build the composite
//! index, estimate the dynamic-panel GMM models and write reproducible reports.

pub mod commands;
pub mod config;
pub mod error;

use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

pub use commands::{cmd_gmm, cmd_index, cmd_pipeline, cmd_simulate, cmd_validate, RunOptions};
pub use config::{Format, PipelineConfig};
pub use error::{CliError, ErrorClass};

#[derive(Debug, Parser)]
#[command(name = "inclusiveness", version, about = "Composite index construction and dynamic-panel GMM")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct ConfigArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Output directory; overrides `out_dir` from the config.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Emit only this format instead of the configured list.
    #[arg(long, value_enum)]
    pub format: Option<Format>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check the input panel against the schema.
    Validate(ConfigArgs),
    /// Build the index and its adequacy and variance reports.
    Index(ConfigArgs),
    /// Estimate the model blocks.
    Gmm(ConfigArgs),
    /// Run every configured stage and write a manifest.
    Pipeline(ConfigArgs),
    /// Write a synthetic panel and its generating truth.
    Simulate {
        /// Simulation spec (TOML, or JSON by extension). Defaults apply when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value = ".")]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
}

fn load(args: &ConfigArgs) -> Result<(PipelineConfig, RunOptions), CliError> {
    let cfg = PipelineConfig::load(&args.config)?;
    Ok((cfg, RunOptions { out_dir: args.out.clone(), format: args.format }))
}

pub fn run(cli: &Cli, stdout: &mut dyn Write) -> Result<(), CliError> {
    match &cli.command {
        Command::Validate(a) => {
            let (cfg, opts) = load(a)?;
            cmd_validate(&cfg, &opts, stdout).map(drop)
        }
        Command::Index(a) => {
            let (cfg, opts) = load(a)?;
            cmd_index(&cfg, &opts, stdout).map(drop)
        }
        Command::Gmm(a) => {
            let (cfg, opts) = load(a)?;
            cmd_gmm(&cfg, &opts, stdout).map(drop)
        }
        Command::Pipeline(a) => {
            let (cfg, opts) = load(a)?;
            cmd_pipeline(&cfg, &opts, stdout).map(drop)
        }
        Command::Simulate { config, out, seed } => cmd_simulate(config.as_deref(), *seed, out, stdout).map(drop),
    }
}
