//! `ctxrank`: convert corpora, train contextual rankers, evaluate and rank.

mod convert;
mod inspect;
mod manifest;
mod train;

use std::fmt;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use ctxrank::model::Variant;

#[derive(Parser)]
#[command(name = "ctxrank", version, about = "Answer sentence selection with local and global context")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Convert SQuAD / WikiQA / ASNQ files into the JSONL corpus format.
    Convert(convert::ConvertArgs),
    /// Write a synthetic corpus (local, global or mixed context task).
    Synth(convert::SynthArgs),
    /// Train one or more runs of a ranker and write checkpoints and metric CSVs.
    Train(Box<train::TrainArgs>),
    /// Score a corpus with a checkpoint and print MAP and P@1.
    Eval(inspect::EvalArgs),
    /// Print the ranked candidates of one question (or the selection for all).
    Rank(inspect::RankArgs),
    /// Summarize the metric CSVs of a training directory.
    Report(inspect::ReportArgs),
}

/// A failure with a specific process exit code.
#[derive(Debug)]
pub struct Exit {
    pub code: u8,
    pub message: String,
}

impl Exit {
    pub fn compatibility(message: impl Into<String>) -> Self {
        Self { code: 4, message: message.into() }
    }
}

impl fmt::Display for Exit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl std::error::Error for Exit {}

fn exit_code(err: &anyhow::Error) -> u8 {
    if let Some(e) = err.downcast_ref::<Exit>() {
        return e.code;
    }
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<ctxrank::Error>() {
            return match e {
                ctxrank::Error::Parse { .. } => 2,
                ctxrank::Error::Divergence(_) => 3,
                ctxrank::Error::Compatibility(_) | ctxrank::Error::Integrity(_) => 4,
                _ => 1,
            };
        }
    }
    1
}

/// Checkpoint plus corpus, shared by `eval` and `rank`.
#[derive(Args, Debug)]
pub struct ScoringArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long)]
    corpus: PathBuf,
    /// Refuse checkpoints holding a different variant.
    #[arg(long)]
    variant: Option<Variant>,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Convert(a) => convert::run(&a),
        Command::Synth(a) => convert::synth(&a),
        Command::Train(a) => train::run(&a),
        Command::Eval(a) => inspect::eval(&a),
        Command::Rank(a) => inspect::rank(&a),
        Command::Report(a) => inspect::report(&a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
