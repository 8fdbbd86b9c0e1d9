//! `diodeq` command-line front end.

mod compare;
mod failure;
mod io;
mod model_file;
mod physics;
mod stats;
mod train;
mod wigner;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use failure::CmdResult;

/// Fixed offsets from the global seed, one per consumer.
pub mod seeds {
    pub const MLP: u64 = 1;
    pub const GP: u64 = 2;
    pub const QNN: u64 = 3;

    pub fn derive(global: u64, offset: u64) -> u64 {
        global.wrapping_add(offset)
    }
}

pub const TEST_FRACTION: f64 = 0.15;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
    Svg,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModelKind {
    Knn,
    Mlp,
    Fig5,
    Gp,
    Qnn,
}

impl ModelKind {
    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Knn => "knn",
            ModelKind::Mlp => "mlp",
            ModelKind::Fig5 => "fig5",
            ModelKind::Gp => "gp",
            ModelKind::Qnn => "qnn",
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "diodeq", version, about = "Photodiode I-V modelling and characterisation")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Output directory.
    #[arg(long, global = true, default_value = "diodeq-out")]
    pub out: PathBuf,
    #[arg(long, global = true, default_value_t = 42)]
    pub seed: u64,
    /// json or csv for `stats`; svg adds an image to `wigner`.
    #[arg(long, global = true, value_enum, default_value = "json")]
    pub format: Format,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Descriptive statistics of an I-V dataset.
    Stats {
        #[arg(long)]
        input: PathBuf,
    },
    /// Train one model on the seeded 85/15 split.
    Train(train::TrainArgs),
    /// Score saved models on a dataset.
    Compare(compare::CompareArgs),
    /// Diode parameter and figure-of-merit extraction.
    Physics(physics::PhysicsArgs),
    /// Wigner function of an encoded or QNN output state.
    Wigner(wigner::WignerArgs),
}

fn run(cli: &Cli) -> CmdResult {
    match &cli.command {
        Command::Stats { input } => stats::run(cli, input),
        Command::Train(a) => train::run(cli, a),
        Command::Compare(a) => compare::run(cli, a),
        Command::Physics(a) => physics::run(cli, a),
        Command::Wigner(a) => wigner::run(cli, a),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("DIODEQ_LOG", "warn")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {f}");
            ExitCode::from(f.code)
        }
    }
}
