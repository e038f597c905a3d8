//! `bohmflow`: field frames, trajectory ensembles and the verification
//! suite for the two-packet interference model.

mod commands;
mod config;
mod error;
mod output;
mod verify;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::config::{Mode, RunConfig};
use crate::error::CliError;

#[derive(Debug, Parser)]
#[command(name = "bohmflow", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// JSON run configuration; missing fields take their defaults.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Override a configuration field, e.g. `--set grid.n=4096`.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    overrides: Vec<String>,

    #[arg(long, global = true, value_enum)]
    mode: Option<Mode>,

    /// Output directory.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write `fields_t<t>.csv` for every emitted time plus `manifest.json`.
    Fields,
    /// Write `ensemble.csv` and its `ensemble.json` sidecar.
    Trajectories,
    /// Run every acceptance check and write `verify_report.json`.
    Verify,
}

fn run(cli: Cli) -> Result<(), CliError> {
    let mut overrides = cli.overrides;
    if let Some(mode) = cli.mode {
        overrides.push(format!("mode={}", serde_json::to_string(&mode).expect("plain enum")));
    }
    if let Some(out) = cli.out {
        overrides.push(format!("output={}", serde_json::Value::from(out.to_string_lossy().into_owned())));
    }
    let config = RunConfig::load(cli.config.as_deref(), &overrides)?;
    match cli.command {
        Command::Fields => commands::fields(&config),
        Command::Trajectories => commands::trajectories(&config),
        Command::Verify => verify::verify(&config).map(|_| ()),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
