//! `kfat` — consistency-based Kalman filter noise tuning from the shell.
//!
//! Four subcommands: `scan` sweeps the Monte Carlo cost over an intensity
//! grid, `oracle` does the same with the closed-form expected NEES (plus
//! consistency-line and sample-time-sweep modes), `tune` runs an optimizer
//! for one or more trials, and `validate` re-simulates at fixed intensities
//! and reports consistency checks. Everything lands as CSV/JSON in the
//! output directory next to a manifest; plotting is left to external tools.

mod oracle_cmd;
mod output;
mod scan;
mod tune;
mod validate;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "kfat", version, about = "Kalman filter noise auto-tuning toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Monte Carlo consistency-cost surfaces over a (V, W) grid
    Scan(scan::ScanArgs),
    /// Theoretical expected-NEES surfaces, consistency lines and dt sweeps
    Oracle(oracle_cmd::OracleArgs),
    /// Run a tuner for one or more trials and summarize the results
    Tune(tune::TuneArgs),
    /// Re-simulate at fixed intensities and report consistency checks
    Validate(validate::ValidateArgs),
}

/// Flags shared by every subcommand.
#[derive(Args, Clone)]
pub struct CommonArgs {
    /// JSON configuration file
    #[arg(long, value_name = "PATH")]
    pub config: PathBuf,
    /// Output directory, created if missing
    #[arg(long, value_name = "DIR")]
    pub out: PathBuf,
    /// Override the configured seed
    #[arg(long)]
    pub seed: Option<u64>,
    /// Override the Monte Carlo run count
    #[arg(long)]
    pub runs: Option<usize>,
    /// Override the steps per run
    #[arg(long)]
    pub steps: Option<usize>,
    /// Override how measurement intensities map to discrete covariances
    #[arg(long, value_enum)]
    pub sensor_kind: Option<SensorKindArg>,
}

#[derive(Debug, Clone, Copy, clap::ValueEnum)]
pub enum SensorKindArg {
    /// R = diag(W) / dt
    Integrating,
    /// R = diag(W), independent of dt
    NonIntegrating,
}

impl From<SensorKindArg> for kfat_core::SensorKind {
    fn from(kind: SensorKindArg) -> Self {
        match kind {
            SensorKindArg::Integrating => kfat_core::SensorKind::Integrating,
            SensorKindArg::NonIntegrating => kfat_core::SensorKind::NonIntegrating,
        }
    }
}

fn init_thread_pool() {
    if let Ok(value) = std::env::var("KFAT_THREADS") {
        if let Ok(threads) = value.parse::<usize>() {
            if threads >= 1 {
                let _ = rayon::ThreadPoolBuilder::new()
                    .num_threads(threads)
                    .build_global();
            }
        }
    }
}

fn main() -> ExitCode {
    init_thread_pool();
    let cli = Cli::parse();
    let (name, result) = match cli.command {
        Command::Scan(args) => ("scan", scan::run(&args)),
        Command::Oracle(args) => ("oracle", oracle_cmd::run(&args)),
        Command::Tune(args) => ("tune", tune::run(&args)),
        Command::Validate(args) => ("validate", validate::run(&args)),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            let record = serde_json::json!({
                "error": { "command": name, "message": err.to_string() }
            });
            eprintln!("{record}");
            ExitCode::FAILURE
        }
    }
}
