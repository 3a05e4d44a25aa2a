//! `photobot` command-line tool.

use std::process::ExitCode;

use clap::{Parser, Subcommand};

use photobot::stats::StatsError;
use photobot::tinynet::NetError;

mod commands;
mod config;

use commands::*;

#[derive(Parser)]
#[command(name = "photobot", version, about = "Picture selection and robot photographer simulation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Validate raw detector output into a dataset.
    Ingest(IngestArgs),
    /// Burst-atomic train/test/validation split.
    Split(SplitArgs),
    /// Train the feature-based face quality network.
    TrainFaceAnn(TrainFaceArgs),
    /// Train the image-based face quality network.
    TrainFaceCnn(TrainFaceArgs),
    /// Train the face-layout picture classifier.
    TrainPictureCnn(TrainPictureArgs),
    /// Fit baseline or heuristic thresholds with the genetic algorithm.
    OptimizeThresholds(OptimizeArgs),
    /// Accuracy of each method, overall and per face-count category.
    Evaluate(EvaluateArgs),
    /// Crop, score and pick the best pictures per method.
    Select(SelectArgs),
    /// Run a robot scenario and write its event log.
    Simulate(SimulateArgs),
    /// Write the abstract face-layout image of pictures as PGM.
    RenderAbstract(RenderArgs),
    /// One-sided Welch t-test on two rating samples.
    Ttest(TtestArgs),
    /// Generate a synthetic rule-labeled dataset.
    Synth(SynthArgs),
}

const EXIT_USAGE: u8 = 2;
const EXIT_DATA: u8 = 3;
const EXIT_NUMERIC: u8 = 4;

/// Exit code for a failed command.
fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if cause.downcast_ref::<config::Usage>().is_some() {
            return EXIT_USAGE;
        }
        if let Some(e) = cause.downcast_ref::<NetError>() {
            return match e {
                NetError::Diverged { .. } => EXIT_NUMERIC,
                NetError::Config(_) => EXIT_USAGE,
                _ => EXIT_DATA,
            };
        }
        if let Some(StatsError::ZeroVariance) = cause.downcast_ref::<StatsError>() {
            return EXIT_NUMERIC;
        }
    }
    EXIT_DATA
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Ingest(a) => ingest(a),
        Command::Split(a) => split(a),
        Command::TrainFaceAnn(a) => train_face(a, false),
        Command::TrainFaceCnn(a) => train_face(a, true),
        Command::TrainPictureCnn(a) => train_picture(a),
        Command::OptimizeThresholds(a) => optimize(a),
        Command::Evaluate(a) => evaluate_cmd(a),
        Command::Select(a) => select(a),
        Command::Simulate(a) => simulate(a),
        Command::RenderAbstract(a) => render(a),
        Command::Ttest(a) => ttest(a),
        Command::Synth(a) => synth(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}
