//! `icebox`: grey-box identification of ultra-low temperature freezer heat
//! dynamics from the command line.
//!
//! Exit codes: 0 success, 2 usage, 3 configuration error, 4 data or I/O
//! error, 5 numerical failure.

mod commands;
mod config;
mod error;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::Context;
use config::RunConfig;

#[derive(Parser)]
#[command(
    name = "icebox",
    about = "Grey-box identification of ULT freezer heat dynamics",
    version
)]
struct Cli {
    /// Run configuration (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Input dataset CSV.
    #[arg(long, global = true)]
    data: Option<PathBuf>,

    /// Output directory for artifacts (default: config [output].dir or ".").
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Seed override for randomized stages.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Worker threads for restarts and profile grids.
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic dataset with known truth parameters.
    Simulate,
    /// Maximum likelihood fit of the model on a dataset.
    Fit,
    /// Unconditional prediction and sigmoid/evaporator reconstruction.
    Predict,
    /// Profile likelihood over a parameter grid.
    Profile,
    /// Residual diagnostics of one-step prediction errors.
    Diagnose,
    /// Partial retune from a baseline fit on new data.
    Retune,
}

fn main() -> ExitCode {
    let cli = Cli::parse();

    let config = match &cli.config {
        Some(path) => match RunConfig::load(path) {
            Ok(c) => c,
            Err(e) => {
                eprintln!("error: {e}");
                return ExitCode::from(e.category.code() as u8);
            }
        },
        None => {
            eprintln!("error: --config <path> is required");
            return ExitCode::from(3);
        }
    };

    let out_dir = cli
        .out
        .or_else(|| config.output.as_ref().map(|o| o.dir.clone()))
        .unwrap_or_else(|| PathBuf::from("."));
    if let Err(e) = std::fs::create_dir_all(&out_dir) {
        eprintln!("error: cannot create output directory {}: {e}", out_dir.display());
        return ExitCode::from(4);
    }

    let ctx = Context {
        seed: cli.seed.or(config.seed).unwrap_or(0),
        threads: cli.threads.or(config.threads).unwrap_or(1).max(1),
        data_path: cli.data,
        out_dir,
        config,
    };

    let result = match cli.command {
        Command::Simulate => commands::run_simulate(&ctx),
        Command::Fit => commands::run_fit(&ctx),
        Command::Predict => commands::run_predict(&ctx),
        Command::Profile => commands::run_profile(&ctx),
        Command::Diagnose => commands::run_diagnose(&ctx),
        Command::Retune => commands::run_retune(&ctx),
    };

    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.category.code() as u8)
        }
    }
}
