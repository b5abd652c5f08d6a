//! `demarg`: run single-marginal nonclassicality analyses on measurement
//! records or built-in states.
//!
//! Exit codes: 0 on success, 2 for invalid input, 3 when a cutoff or the
//! measured k range is insufficient.

mod commands;
mod config;
mod report;

use clap::Parser;
use demarg_core::{DemargError, Result};

use config::{Cli, Command};

fn init_threads() -> Result<()> {
    let Ok(v) = std::env::var("DEMARG_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|n| *n > 0)
        .ok_or_else(|| DemargError::Validation(format!("DEMARG_THREADS must be a positive integer, got '{v}'")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| DemargError::Validation(format!("thread pool: {e}")))
}

fn run(cli: Cli) -> Result<()> {
    init_threads()?;
    match &cli.command {
        Command::Negativity(a) => commands::negativity(a),
        Command::Klm(a) => commands::klm(a),
        Command::Moments(a) => commands::moments(a),
        Command::Entanglement(a) => commands::entanglement(a),
        Command::GaussianBound(a) => commands::gaussian_bound(a),
        Command::Simulate(a) => commands::simulate(a),
    }
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    if let Err(e) = run(cli) {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
