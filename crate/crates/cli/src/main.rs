//! `matchfn`: simulate two-sided market panels and estimate matching efficiency
//! and elasticities from them.

mod commands;
mod error;
mod output;
mod table;

use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::estimate::EstimateArgs;
use commands::report::ReportArgs;
use commands::simulate::SimulateArgs;
use commands::within_area::WithinAreaArgs;
use error::CliError;

/// Environment variable capping the number of worker threads.
const THREADS_VAR: &str = "MATCHFN_THREADS";

#[derive(Debug, Parser)]
#[command(
    name = "matchfn",
    version,
    about = "Nonparametric matching-function estimation for two-sided markets"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic panel with known efficiency and elasticities.
    Simulate(SimulateArgs),
    /// Recover efficiency, the matching surface and elasticities from a panel.
    Estimate(EstimateArgs),
    /// Merge series tables into one long table (ym, region, metric, value).
    Report(ReportArgs),
    /// Share of matches within the same region, per period and region.
    WithinArea(WithinAreaArgs),
}

fn configure_threads() -> Result<(), CliError> {
    let Ok(raw) = std::env::var(THREADS_VAR) else {
        return Ok(());
    };
    let n: usize = raw.trim().parse().ok().filter(|&n| n > 0).ok_or_else(|| {
        CliError::Validation(format!(
            "invalid value for {THREADS_VAR}: `{raw}` is not a positive integer"
        ))
    })?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(CliError::internal)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = configure_threads().and_then(|()| match &cli.command {
        Command::Simulate(args) => commands::simulate::run(args),
        Command::Estimate(args) => commands::estimate::run(args),
        Command::Report(args) => commands::report::run(args),
        Command::WithinArea(args) => commands::within_area::run(args),
    });
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
