//! `depsched`: calibrate cost models, solve for a pipeline configuration,
//! simulate it, sweep a grid, or validate the models against ground truth.
//!
//! Exit status: 0 success, 2 invalid input, 3 infeasible instance,
//! 4 validation failure.

mod commands;
mod error;
mod io;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::{calibrate, simulate, solve, sweep, validate};
use error::CliError;

#[derive(Debug, Parser)]
#[command(
    name = "depsched",
    version,
    about = "Pipeline scheduling for disaggregated expert-parallel MoE inference"
)]
struct Cli {
    /// Write a JSON manifest of the run's inputs and outputs here.
    #[arg(long, global = true)]
    manifest: Option<PathBuf>,
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Debug, Subcommand)]
enum Cmd {
    /// Fit alpha-beta models to micro-benchmark samples.
    Calibrate(calibrate::CalibrateArgs),
    /// Search the best configuration and compare it with the PPPipe baseline.
    Solve(solve::SolveArgs),
    /// Simulate one configuration and export its timeline.
    Simulate(simulate::SimulateArgs),
    /// Evaluate a grid of configurations, optimizing the unfixed variables.
    Sweep(sweep::SweepArgs),
    /// Check timelines, constraints and the solver against brute force.
    Validate(validate::ValidateArgs),
}

fn run(cli: &Cli) -> Result<(), CliError> {
    let manifest = match &cli.command {
        Cmd::Calibrate(a) => calibrate::run(a)?,
        Cmd::Solve(a) => solve::run(a)?,
        Cmd::Simulate(a) => simulate::run(a)?,
        Cmd::Sweep(a) => sweep::run(a)?,
        Cmd::Validate(a) => validate::run(a)?,
    };
    if let Some(path) = &cli.manifest {
        io::write_all(vec![(path.clone(), io::to_json(&manifest))])?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
