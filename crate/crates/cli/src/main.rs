//! Command-line driver: reproducible simulation runs, efficiency
//! prediction, cross-engine verification, and wall-clock benchmarking.
//!
//! Exit codes: 0 ok, 1 verification/simulation failure, 2 argument error,
//! 3 i/o error.

mod bench;
mod common;
mod predict;
mod simulate;
mod verify;

use clap::{Parser, Subcommand};

use asyncell::SimError;

#[derive(Parser)]
#[command(name = "asyncell", version, about = "Simulation engine for asynchronous cellular arrays")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one engine and report the trajectory hash and counters.
    Simulate(simulate::SimulateArgs),
    /// Run the round-model efficiency predictors.
    Predict(predict::PredictArgs),
    /// Check determinism and partition invariance against the serial oracle.
    Verify(verify::VerifyArgs),
    /// Time a parallel engine against the serial procedure at matched work.
    Bench(bench::BenchArgs),
}

fn main() -> std::process::ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Simulate(args) => simulate::run(&args),
        Command::Predict(args) => predict::run(&args),
        Command::Verify(args) => verify::run(&args),
        Command::Bench(args) => bench::run(&args),
    };
    match outcome {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            let code = match e {
                SimError::InvalidArgument(_) => 2,
                SimError::TieFault { .. } => 1,
                SimError::Io(_) => 3,
            };
            std::process::ExitCode::from(code)
        }
    }
}
