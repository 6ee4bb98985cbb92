//! Batch entry points for the panel nowcasting toolkit.
//!
//! Exit codes: 0 success, 2 configuration error, 3 data error,
//! 4 numeric or convergence error.

mod commands;
mod config;

use clap::{Args, Parser, Subcommand};
use sgmidas::error::{Error, Result};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "sgmidas",
    about = "Mixed-frequency panel nowcasting with sparse-group LASSO MIDAS regressions",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct CommonArgs {
    /// JSON run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Override the configured master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker-thread cap (default: available parallelism).
    #[arg(long)]
    threads: Option<usize>,
    /// Output directory for CSVs and the manifest.
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Reproduce the relative-MSE simulation table over a config grid.
    McTable(CommonArgs),
    /// Fit families on a panel CSV and write nowcasts, weights and the
    /// selected-variable matrix.
    Nowcast(CommonArgs),
    /// Expanding-window out-of-sample evaluation with RMSE tables.
    Evaluate(CommonArgs),
    /// Export aggregation-weight matrices per scheme.
    Weights(CommonArgs),
}

fn read_config<T: serde::de::DeserializeOwned>(path: &PathBuf) -> Result<T> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
    serde_json::from_str(&text)
        .map_err(|e| Error::Config(format!("invalid config {}: {e}", path.display())))
}

fn setup_threads(threads: Option<usize>) -> Result<()> {
    if let Some(n) = threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    }
    Ok(())
}

fn run() -> Result<()> {
    let cli = Cli::parse();
    match cli.command {
        Command::McTable(args) => {
            setup_threads(args.threads)?;
            let config = read_config(&args.config)?;
            commands::cmd_mc_table(&config, args.seed, &args.out)
        }
        Command::Nowcast(args) => {
            setup_threads(args.threads)?;
            let config = read_config(&args.config)?;
            commands::cmd_nowcast(&config, args.seed, &args.out)
        }
        Command::Evaluate(args) => {
            setup_threads(args.threads)?;
            let config = read_config(&args.config)?;
            commands::cmd_evaluate(&config, args.seed, &args.out)
        }
        Command::Weights(args) => {
            setup_threads(args.threads)?;
            let config = read_config(&args.config)?;
            commands::cmd_weights(&config, args.seed, &args.out)
        }
    }
}

fn main() -> ExitCode {
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.exit_code() as u8)
        }
    }
}
