pub mod artifacts;
pub mod commands;
pub mod config;
pub mod service;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use framefill_core::decoder::InfillError;
use framefill_core::engine::EngineError;

#[derive(Debug, Parser)]
#[command(name = "framefill", version, about = "Frame-guided sentence infilling")]
pub struct Cli {
    #[command(flatten)]
    pub global: Global,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Global {
    /// TOML settings file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Seed for every random choice.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Print JSON instead of text.
    #[arg(long, global = true)]
    pub json: bool,
    /// Directory holding the lexicon, tokenizer files and corpus.
    #[arg(long, global = true)]
    pub data_dir: Option<PathBuf>,
    /// N-gram model file.
    #[arg(long, global = true)]
    pub model: Option<PathBuf>,
    /// Remote scorer base URL, used instead of the model file.
    #[arg(long, global = true)]
    pub scorer_url: Option<String>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Turn an annotated corpus into infilling examples (JSONL).
    Prepare(commands::PrepareArgs),
    /// Train a byte-level BPE tokenizer on the corpus sentences.
    TrainBpe(commands::TrainBpeArgs),
    /// Train the n-gram scorer on prepared examples.
    TrainLm(commands::TrainLmArgs),
    /// Fill the blanks of a story, optionally guided by frames.
    Infill(commands::InfillArgs),
    /// Lexical frame fidelity of generated sentences.
    EvalFidelity(commands::EvalFidelityArgs),
    /// Perplexity of the scorer on masked infills.
    EvalPpl(commands::EvalPplArgs),
    /// Suggest frames for a blank from its neighbours.
    Suggest(commands::SuggestArgs),
    /// Serve the HTTP API.
    Serve(commands::ServeArgs),
    /// Serve the scorer alone over HTTP.
    ServeScorer(commands::ServeArgs),
}

/// Exit status for an error: 2 for requests naming unknown things, else 1.
pub fn exit_status(err: &anyhow::Error) -> u8 {
    let unknown_frame = err.chain().any(|e| {
        matches!(
            e.downcast_ref::<EngineError>(),
            Some(EngineError::Infill(InfillError::UnknownFrame(_)))
        ) || matches!(
            e.downcast_ref::<InfillError>(),
            Some(InfillError::UnknownFrame(_))
        )
    });
    if unknown_frame {
        2
    } else {
        1
    }
}

fn error_code(err: &anyhow::Error) -> &'static str {
    err.chain()
        .find_map(|e| e.downcast_ref::<EngineError>().map(EngineError::code))
        .unwrap_or("error")
}

pub fn run(cli: Cli) -> ExitCode {
    let json = cli.global.json;
    match commands::dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            let message = err
                .chain()
                .map(|e| e.to_string())
                .collect::<Vec<_>>()
                .join(": ");
            if json {
                let body =
                    serde_json::json!({"error": {"code": error_code(&err), "message": message}});
                eprintln!("{body}");
            } else {
                eprintln!("error: {message}");
            }
            ExitCode::from(exit_status(&err))
        }
    }
}
