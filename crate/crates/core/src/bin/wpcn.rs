use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use wpcn_alloc::cli::{exit_code, run_csv, sweep_csv, validate_report, Axis, Scheme};
use wpcn_alloc::error::{Error, Result};
use wpcn_alloc::model::SystemConfig;

/// Resource allocation for wireless-powered networks.
#[derive(Parser)]
#[command(name = "wpcn", version)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run one scheme on one seeded channel draw.
    Run {
        /// JSON configuration; the desk defaults when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        scheme: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// CSV destination; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run one scheme over a grid of values on one axis.
    Sweep {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        scheme: String,
        /// alpha, p_max or K.
        #[arg(long)]
        axis: String,
        /// Comma-separated axis values; `inf` is max-min on the alpha axis.
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<f64>,
        /// Comma-separated seeds.
        #[arg(long, value_delimiter = ',', default_value = "0")]
        seeds: Vec<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check a configuration and print its derived quantities.
    Validate {
        #[arg(long)]
        config: Option<PathBuf>,
    },
}

fn load(path: Option<&PathBuf>) -> Result<SystemConfig> {
    match path {
        None => Ok(SystemConfig::desk()),
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| Error::Config(format!("{}: {e}", p.display())))?;
            SystemConfig::from_json_str(&text)
        }
    }
}

fn emit(text: &str, out: Option<&PathBuf>) -> Result<()> {
    match out {
        None => {
            print!("{text}");
            Ok(())
        }
        Some(p) => std::fs::write(p, text).map_err(|e| Error::Argument(format!("{}: {e}", p.display()))),
    }
}

fn main_inner(cli: Cli) -> Result<()> {
    match cli.cmd {
        Cmd::Run { config, scheme, seed, out } => {
            let cfg = load(config.as_ref())?;
            let text = run_csv(scheme.parse::<Scheme>()?, &cfg, seed)?;
            emit(&text, out.as_ref())
        }
        Cmd::Sweep { config, scheme, axis, values, seeds, out } => {
            let cfg = load(config.as_ref())?;
            let text = sweep_csv(scheme.parse::<Scheme>()?, &cfg, axis.parse::<Axis>()?, &values, &seeds)?;
            emit(&text, out.as_ref())
        }
        Cmd::Validate { config } => emit(&validate_report(&load(config.as_ref())?)?, None),
    }
}

fn main() -> ExitCode {
    match main_inner(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}
