use clap::{Parser, Subcommand};
use spherecc::error::Error;

mod commands;
mod config;
mod manifest;

#[derive(Parser)]
#[command(name = "spherecc", version, about = "Constrained clustering on the unit sphere")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic mixture dataset with a split and constraints
    Gen(commands::gen::GenArgs),
    /// Learn a constraint embedding and write a model checkpoint
    Train(commands::train::TrainArgs),
    /// Cluster a trained embedding and report metrics
    Cluster(commands::cluster::ClusterArgs),
    /// Infer the number of clusters from a trained embedding
    InferK(commands::infer_k::InferKArgs),
    /// Run the geometry self-check suite
    VerifyTheory(commands::verify::VerifyArgs),
    /// Score a predicted labeling against a reference labeling
    Eval(commands::eval::EvalArgs),
}

/// 0 success, 1 property failure, 2 usage/validation, 3 divergence.
/// Clap's own usage errors also exit with 2.
fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Diverged { .. } | Error::NonFiniteGradient { .. } => 3,
        _ => 2,
    }
}

fn main() {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Gen(a) => commands::gen::run(a),
        Command::Train(a) => commands::train::run(a),
        Command::Cluster(a) => commands::cluster::run(a),
        Command::InferK(a) => commands::infer_k::run(a),
        Command::VerifyTheory(a) => commands::verify::run(a),
        Command::Eval(a) => commands::eval::run(a),
    };
    match outcome {
        Ok(code) => std::process::exit(code),
        Err(e) => {
            // A reader hanging up mid-stream (`... | head`) is not a failure.
            if let Error::Io(io) = &e {
                if io.kind() == std::io::ErrorKind::BrokenPipe {
                    std::process::exit(0);
                }
            }
            eprintln!("error: {e}");
            std::process::exit(exit_code(&e));
        }
    }
}
