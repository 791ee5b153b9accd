//! `qsw` — run discrete-time quantum stochastic walks from JSON experiment
//! configurations: exact channel evolution, trajectory-ensemble sampling,
//! protocol-vs-channel enumeration checks, and continuous-time reduction.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

mod commands;
mod config;
mod output;

use config::Mode;

#[derive(Parser)]
#[command(
    name = "qsw",
    version,
    about = "Discrete-time quantum stochastic walk simulator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct CommonArgs {
    /// Experiment configuration file (JSON); the single source of truth for
    /// a run, including the seed
    config: PathBuf,
    /// Override the configured output directory
    #[arg(long)]
    output_dir: Option<PathBuf>,
    /// Cap the number of worker threads; never affects numerical results
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Check a graph or Lindblad file against its invariants
    Validate(CommonArgs),
    /// Evolve the exact channel and write per-step populations
    Exact(CommonArgs),
    /// Run a trajectory ensemble and report convergence to the exact channel
    Sample(CommonArgs),
    /// Compare the enumerated protocol channel against the exact channel
    Enumerate(CommonArgs),
    /// Reduce a continuous-time walk to a discrete-time graph
    CtReduce(CommonArgs),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (mode, args) = match cli.command {
        Command::Validate(a) => (Mode::Validate, a),
        Command::Exact(a) => (Mode::Exact, a),
        Command::Sample(a) => (Mode::Sample, a),
        Command::Enumerate(a) => (Mode::Enumerate, a),
        Command::CtReduce(a) => (Mode::CtReduce, a),
    };
    match commands::run(mode, &args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.exit_code())
        }
    }
}
