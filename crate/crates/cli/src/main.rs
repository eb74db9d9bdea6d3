//! `knockoff` command-line tool.

mod filter;
mod seqtest;
mod simulate;

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use knockoff_core::Error;

#[derive(Parser)]
#[command(
    name = "knockoff",
    version,
    about = "Knockoff filter for FDR-controlled variable selection"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the knockoff filter on a CSV design and response.
    Filter(filter::FilterArgs),
    /// Run a synthetic comparison experiment.
    Simulate(simulate::SimulateArgs),
    /// Check a sequential testing procedure on synthetic p-values.
    Seqtest(seqtest::SeqtestArgs),
}

/// Opens `path` for writing, or stdout when absent.
pub(crate) fn output(path: Option<&Path>) -> Result<Box<dyn Write>, Error> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            eprintln!("InvalidArgument: {}", e.kind());
            let _ = e.print();
            return ExitCode::FAILURE;
        }
    };
    let result = match cli.command {
        Command::Filter(args) => filter::run(args),
        Command::Simulate(args) => simulate::run(args),
        Command::Seqtest(args) => seqtest::run(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}: {e}", e.name());
            ExitCode::FAILURE
        }
    }
}
