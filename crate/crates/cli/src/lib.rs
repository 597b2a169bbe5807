//! Command-line front end: simulate → correlate → tomo → metrics, or all of
//! them at once with `pipeline`.

pub mod analyze;
pub mod config;
pub mod correlate;
pub mod error;
pub mod output;
pub mod pipeline;
pub mod simulate;

use std::path::PathBuf;

use clap::{Parser, Subcommand};

use crate::config::{parse_override, RunConfig};
use crate::error::CliError;
use crate::output::{read_json, read_to_string, Format};

#[derive(Debug, Parser)]
#[command(
    name = "biexciton",
    version,
    about = "Biexciton cascade entanglement toolkit"
)]
pub struct Cli {
    /// Flat `key = value` configuration file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    /// Master seed; overrides the config file.
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// Output directory.
    #[arg(long, global = true, default_value = ".")]
    pub out: PathBuf,

    /// Rendering printed to standard output.
    #[arg(long, global = true, value_enum, default_value_t = Format::Text)]
    pub format: Format,

    /// Override one config key, e.g. `--set cycles=20000`. Repeatable.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE", value_parser = parse_override)]
    pub overrides: Vec<(String, String)>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate detector clicks for one setting (e.g. H_rect), `all12`, or
    /// `all` (the twelve plus the X-X autocorrelation stream).
    Simulate {
        #[arg(default_value = "all12")]
        setting: String,
    },
    /// Histogram event files and compute the degree of correlation.
    Correlate {
        #[arg(required = true)]
        files: Vec<PathBuf>,
    },
    /// Reconstruct the density matrix from a correlation report.
    Tomo { input: PathBuf },
    /// Run the six entanglement tests on a tomography result.
    Metrics { input: PathBuf },
    /// Run every stage and write summary.json.
    Pipeline,
}

impl Cli {
    /// Defaults, then the config file, then `--set`, then `--seed`.
    pub fn run_config(&self) -> Result<RunConfig, CliError> {
        let text = self.config.as_deref().map(read_to_string).transpose()?;
        let mut overrides = self.overrides.clone();
        if let Some(seed) = self.seed {
            overrides.push(("seed".to_string(), seed.to_string()));
        }
        RunConfig::resolve(text.as_deref(), &overrides)
    }
}

/// Executes the command and returns what should go to standard output.
pub fn run(cli: &Cli) -> Result<String, CliError> {
    let cfg = cli.run_config()?;
    let out = &cli.out;
    let rendered = match &cli.command {
        Command::Simulate { setting } => {
            let targets = simulate::Target::parse_request(setting)?;
            simulate::simulate(&cfg, &targets, out)?.render(cli.format)
        }
        Command::Correlate { files } => {
            correlate::correlate(files, cfg.max_delay, out)?.render(cli.format)
        }
        Command::Tomo { input } => {
            let source: analyze::TomoSource = read_json(input)?;
            analyze::tomo(&source, &cfg, out)?.render(cli.format)
        }
        Command::Metrics { input } => {
            let tomo: analyze::TomoOutput = read_json(input)?;
            analyze::metrics(&tomo, cfg.hwp_points, out)?.render(cli.format)
        }
        Command::Pipeline => pipeline::pipeline(&cfg, out)?.render(cli.format),
    };
    Ok(rendered)
}
