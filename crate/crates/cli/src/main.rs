use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

mod commands;
mod data;

use volgraph_core::Error;

#[derive(Parser)]
#[command(
    name = "volgraph",
    version,
    about = "Volume-to-graph compaction toolkit"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Flags every subcommand accepts.
#[derive(clap::Args, Clone)]
pub struct Common {
    /// JSON config file for this subcommand.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Master seed. Experiment commands run seeds seed, seed+1, ...
    #[arg(long, global = true)]
    pub seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Synthesize a dataset of activation volumes plus a manifest.
    Generate(commands::GenerateArgs),
    /// Produce a reduced representation (projection, binarization, ...) per sample.
    Reduce(commands::ReduceArgs),
    /// Segment one volume or image into supervoxels/superpixels.
    Segment(commands::SegmentArgs),
    /// Encode samples as region graphs.
    Encode(commands::EncodeArgs),
    /// Train a model; streams per-epoch metrics as JSON lines.
    Train(commands::TrainArgs),
    /// Accuracy of a checkpoint on a test split or a whole dataset.
    Eval(commands::EvalArgs),
    /// Brute and pretrained healthy-to-unhealthy transfer.
    Transfer(commands::TransferArgs),
    /// Render experiment records as CSV and text tables.
    Report(commands::ReportArgs),
}

fn exit_code(e: &Error) -> u8 {
    if e.is_parameter_error() || matches!(e, Error::Json(_)) {
        2
    } else if e.is_numeric_error() {
        3
    } else {
        1
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Generate(a) => commands::generate(a),
        Command::Reduce(a) => commands::reduce(a),
        Command::Segment(a) => commands::segment(a),
        Command::Encode(a) => commands::encode(a),
        Command::Train(a) => commands::train(a),
        Command::Eval(a) => commands::eval(a),
        Command::Transfer(a) => commands::transfer(a),
        Command::Report(a) => commands::report(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let _ = writeln!(io::stderr(), "error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
