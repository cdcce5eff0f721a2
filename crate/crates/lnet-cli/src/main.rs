//! `lnet` — training and evaluation toolkit for the LNet intrusion-detection
//! models: ingest raw datasets, train with batch-wise self-distillation,
//! evaluate, sweep hyperparameters, run the variant ablation, and count
//! parameters/FLOPs.

mod commands;
mod config;
mod report;

use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "lnet", version, about = "Lightweight self-distilled intrusion-detection models")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse raw dataset files into an encoded archive plus a report.
    Ingest(commands::ingest::IngestArgs),
    /// Train one model on an encoded archive.
    Train(commands::train::TrainArgs),
    /// Evaluate a saved model against an archive.
    Eval(commands::eval::EvalArgs),
    /// One training run per hyperparameter value (shared seed).
    Sweep(commands::sweep::SweepArgs),
    /// Train cnn, lnet-minus, lnet and lnet-skd with a shared seed.
    Ablate(commands::ablate::AblateArgs),
    /// Parameter and FLOPs accounting for a model configuration.
    Count(commands::count::CountArgs),
}

fn main() {
    env_logger::init();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Ingest(args) => commands::ingest::run(args),
        Command::Train(args) => commands::train::run(args),
        Command::Eval(args) => commands::eval::run(args),
        Command::Sweep(args) => commands::sweep::run(args),
        Command::Ablate(args) => commands::ablate::run(args),
        Command::Count(args) => commands::count::run(args),
    };
    if let Err(e) = result {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}
