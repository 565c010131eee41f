use std::process::ExitCode;

use clap::{Parser, Subcommand};
use photomesh::memory::CountingAlloc;

mod bench;
mod train;
mod verify;

#[global_allocator]
static ALLOC: CountingAlloc = CountingAlloc;

/// Simulate, check and train photonic unitary-mesh networks.
#[derive(Parser, Debug)]
#[command(name = "photomesh", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run the self-check suites and print a pass/fail table.
    Verify(verify::VerifyArgs),
    /// Time forward+backward passes and write CSV records.
    Bench(bench::BenchArgs),
    /// Train the mesh classifier on a dataset.
    Train(train::TrainArgs),
}

/// Failure classes mapped onto exit codes.
pub enum Failure {
    /// A check or run failed (exit 1).
    Check(anyhow::Error),
    /// Bad flags or unresolvable inputs (exit 2).
    Usage(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Check(e)
    }
}

impl From<photomesh::Error> for Failure {
    fn from(e: photomesh::Error) -> Self {
        Failure::Check(e.into())
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Check(e.into())
    }
}

pub fn usage(msg: impl std::fmt::Display) -> Failure {
    Failure::Usage(anyhow::anyhow!("{msg}"))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Verify(args) => verify::run(args),
        Command::Bench(args) => bench::run(args),
        Command::Train(args) => train::run(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Check(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
        Err(Failure::Usage(e)) => {
            eprintln!("usage error: {e:#}");
            ExitCode::from(2)
        }
    }
}
