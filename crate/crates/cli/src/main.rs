//! `ssv`: reproducible experiments over hierarchical prototype manifolds —
//! synthetic data generation, projection-head training, surprise probing,
//! manifold diagnostics, and ternary risk evaluation.

mod commands;
mod config;
mod errors;
mod manifest;

use clap::{Parser, Subcommand};
use commands::*;

#[derive(Parser)]
#[command(
    name = "ssv",
    version,
    about = "Hierarchical prototype manifolds, surprise probes, and ternary OOD risk evaluation"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate synthetic hierarchical embedding splits (.semb + .hier)
    GenData(GenDataArgs),
    /// Train the projection head and prototype bank on an ID split
    Train(TrainArgs),
    /// Compute surprise vectors for embedding files against a checkpoint
    Probe(ProbeArgs),
    /// Report manifold geometric health for an embedded split
    Diagnose(DiagnoseArgs),
    /// Score probe CSVs: nSR, F1, confusion, optional binary OOD metrics
    Evaluate(EvaluateArgs),
}

fn main() {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::GenData(args) => cmd_gen_data(args),
        Command::Train(args) => cmd_train(args),
        Command::Probe(args) => cmd_probe(args),
        Command::Diagnose(args) => cmd_diagnose(args),
        Command::Evaluate(args) => cmd_evaluate(args),
    };
    if let Err(e) = result {
        eprintln!("{e}");
        std::process::exit(e.exit_code());
    }
}
