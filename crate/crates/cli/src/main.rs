//! `groundlens`: generate toy fixtures, propagate relevance, evaluate
//! grounding, render overlays and print tables.
//!
//! Exit codes: 0 success, 1 some clips failed, 2 usage or configuration
//! error, 3 I/O error.

mod error;
mod evaluate;
mod gen_toy;
mod propagate;
mod render;
mod report;
mod shared;

use clap::{Parser, Subcommand};
use error::{CliError, Outcome};
use std::process::ExitCode;

#[derive(Debug, Parser)]
#[command(name = "groundlens", version, about = "Relevance propagation and grounding metrics for factored space-time transformers")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write a synthetic fixture set: clips, annotations, traces, weights.
    GenToy(gen_toy::Args),
    /// Turn every trace of a dataset into a relevance volume.
    Propagate(propagate::Args),
    /// Score relevance volumes against annotations.
    Evaluate(evaluate::Args),
    /// Draw relevance overlays for annotated frames.
    Render(render::Args),
    /// Print grounding and T-IoU tables for one or more reports.
    Report(report::Args),
}

fn run(command: Command) -> Result<Outcome, CliError> {
    match command {
        Command::GenToy(args) => gen_toy::run(args),
        Command::Propagate(args) => propagate::run(args),
        Command::Evaluate(args) => evaluate::run(args),
        Command::Render(args) => render::run(args),
        Command::Report(args) => report::run(args),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli.command) {
        Ok(outcome) => outcome.code(),
        Err(e) => {
            eprintln!("error: {e}");
            e.code()
        }
    }
}
