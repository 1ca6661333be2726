//! `curvopt`: seeded experiment campaigns over the curvopt optimizers.
//!
//! ```text
//! curvopt run <spec.json> [--set key=value]... [--seed-offset N] [--workers N] [--out DIR]
//! curvopt report <dir> [--out DIR]
//! curvopt scaling <spec.json> [--set key=value]... [--seed-offset N] [--workers N] [--out DIR]
//! ```
//!
//! Exit codes: 0 success, 1 a run diverged or failed, 2 invalid spec or
//! unknown problem/optimizer name, 3 I/O failure.

mod commands;
mod spec;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("unknown {kind} {name:?}; valid names: {valid}")]
    UnknownName {
        kind: &'static str,
        name: String,
        valid: String,
    },
    #[error("invalid spec: {0}")]
    Spec(String),
    #[error("{0}")]
    Io(String),
    #[error(transparent)]
    Library(#[from] curvopt::Error),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::UnknownName { .. } | CliError::Spec(_) => 2,
            CliError::Io(_) | CliError::Library(curvopt::Error::Io { .. }) => 3,
            CliError::Library(_) => 1,
        }
    }
}

#[derive(Parser)]
#[command(name = "curvopt", version, about = "Seeded optimizer experiments with escape-time instrumentation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every (optimizer, seed) pair of an experiment spec.
    Run {
        spec: PathBuf,
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Rebuild summary.csv from the traces listed in a run manifest.
    Report {
        dir: PathBuf,
        /// Directory for the summary (default: the run directory).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Median escape time of noisy GD against dimension, with a log-log fit.
    Scaling {
        spec: PathBuf,
        #[command(flatten)]
        common: CommonArgs,
    },
}

#[derive(Args, Clone, Debug)]
pub struct CommonArgs {
    /// Override a spec leaf by dotted path, e.g. `optimizer.alpha=0.05`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
    /// Added to every seed in the spec.
    #[arg(long, default_value_t = 0)]
    pub seed_offset: u64,
    /// Worker threads (default: physical cores).
    #[arg(long)]
    pub workers: Option<usize>,
    /// Output directory, replacing the spec's `output_dir`.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run { spec, common } => commands::run(&spec, &common),
        Command::Report { dir, out } => commands::report(&dir, out.as_deref()).map(|()| true),
        Command::Scaling { spec, common } => commands::scaling(&spec, &common).map(|()| true),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
