//! `gaprewire`: batch front end for spectral-gap rewiring, analysis,
//! smoothing experiments and strategy benchmarks.
//!
//! Exit codes: 0 on success, 2 on invalid input or configuration (nothing
//! is written), 3 when an eigensolve did not converge (outputs are still
//! written, with the warnings).

mod commands;
mod input;

use std::fmt;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::{AnalyzeArgs, BenchArgs, RewireArgs, SmoothArgs};

#[derive(Debug, Parser)]
#[command(name = "gaprewire", version, about = "Spectral-gap graph rewiring")]
struct Cli {
    /// Worker threads for candidate scoring and smoothing trials.
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Greedily add or delete edges to move the spectral gap.
    Rewire(RewireArgs),
    /// Report size, connectivity, spectral gap and (small graphs) the
    /// Cheeger constant as JSON.
    Analyze(AnalyzeArgs),
    /// MSE of ridge regression after k rounds of mean aggregation.
    Smooth(SmoothArgs),
    /// Compare strategies on one graph: gap trajectories and timings.
    Bench(BenchArgs),
}

#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub message: String,
}

impl CliError {
    pub const VALIDATION: u8 = 2;
    pub const NOT_CONVERGED: u8 = 3;

    pub fn validation(message: impl Into<String>) -> Self {
        CliError {
            code: Self::VALIDATION,
            message: message.into(),
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl From<gaprewire::Error> for CliError {
    fn from(e: gaprewire::Error) -> Self {
        let code = match e {
            gaprewire::Error::NotConverged { .. } => Self::NOT_CONVERGED,
            _ => Self::VALIDATION,
        };
        CliError {
            code,
            message: e.to_string(),
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(threads) = cli.threads {
        if threads == 0 {
            eprintln!("error: --threads must be at least 1");
            return ExitCode::from(CliError::VALIDATION);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
        {
            eprintln!("error: cannot configure thread pool: {e}");
            return ExitCode::from(CliError::VALIDATION);
        }
    }
    let result = match cli.command {
        Command::Rewire(args) => commands::rewire(args),
        Command::Analyze(args) => commands::analyze(args),
        Command::Smooth(args) => commands::smooth(args),
        Command::Bench(args) => commands::bench(args),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code)
        }
    }
}
