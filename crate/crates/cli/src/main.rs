//! `mhdiff`: scenario-driven front end for multi-hop diffusion experiments.

mod commands;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use mhdiff_core::optimizer::{Method, Variant};
use mhdiff_core::Error;

#[derive(Debug, Parser)]
#[command(name = "mhdiff", version, about = "Energy-constrained multi-hop diffusion LMS workbench")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Monte Carlo learning curves for every strategy of the scenario.
    Simulate(Common),
    /// Plan information neighborhoods and write the plan file.
    Optimize(Common),
    /// Optimize and evaluate the plan for each network budget.
    Tradeoff(Common),
    /// Theoretical learning curves, steady-state bounds and the balancing coefficient.
    Theory(Common),
    /// Exact and rounded planning side by side for each network budget.
    Compare(Common),
}

#[derive(Debug, Args)]
pub struct Common {
    /// Scenario file.
    #[arg(long, short)]
    pub config: PathBuf,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub runs: Option<usize>,
    #[arg(long)]
    pub iters: Option<usize>,
    #[arg(long, default_value = ".")]
    pub out_dir: PathBuf,
    /// exact or algorithm1.
    #[arg(long)]
    pub method: Option<Method>,
    /// p2 or p3.
    #[arg(long)]
    pub variant: Option<Variant>,
    /// Comma-separated network budgets.
    #[arg(long, value_delimiter = ',')]
    pub budgets: Option<Vec<f64>>,
    /// Write MSD values on a linear scale instead of dB.
    #[arg(long)]
    pub linear: bool,
}

/// A failure and the exit status it maps to.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

pub const EXIT_CONFIG: u8 = 1;
pub const EXIT_INFEASIBLE: u8 = 2;
pub const EXIT_NUMERIC: u8 = 3;

impl Failure {
    pub fn config(message: impl Into<String>) -> Self {
        Failure { code: EXIT_CONFIG, message: message.into() }
    }

    pub fn infeasible(message: impl Into<String>) -> Self {
        Failure { code: EXIT_INFEASIBLE, message: message.into() }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match &e {
            Error::Infeasible | Error::InfeasiblePlan(_) => EXIT_INFEASIBLE,
            Error::Unbounded
            | Error::IterationLimit(_)
            | Error::BetaInfeasible(_)
            | Error::Unstable(_)
            | Error::NotConverged(_)
            | Error::NonPositiveVariance { .. }
            | Error::NotPositiveDefinite(_) => EXIT_NUMERIC,
            _ => EXIT_CONFIG,
        };
        Failure { code, message: e.to_string() }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::config(e.to_string())
    }
}

impl From<csv::Error> for Failure {
    fn from(e: csv::Error) -> Self {
        Failure::config(e.to_string())
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(EXIT_CONFIG) } else { ExitCode::SUCCESS };
        }
    };
    let result = match &cli.command {
        Command::Simulate(c) => commands::simulate(c),
        Command::Optimize(c) => commands::optimize(c),
        Command::Tradeoff(c) => commands::tradeoff(c),
        Command::Theory(c) => commands::theory(c),
        Command::Compare(c) => commands::compare(c),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
