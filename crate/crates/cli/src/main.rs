//! `bitext`: embed, mine, evaluate and run the iterative mining loop.
//!
//! Exit codes: 0 on success, 1 on I/O or runtime failure, 2 on invalid
//! input or configuration.

mod commands;
mod config;
mod error;

use std::process::ExitCode;

use clap::{Parser, Subcommand};
use tracing_subscriber::EnvFilter;

use crate::error::{CliError, CliResult};

#[derive(Debug, Parser)]
#[command(
    name = "bitext",
    version,
    about = "Margin-based bitext mining over sentence embeddings"
)]
struct Cli {
    /// Worker threads; defaults to the number of available cores.
    #[arg(long, global = true, env = "CRISS_THREADS")]
    threads: Option<usize>,
    /// Log progress to stderr (repeat for more detail).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Embed a corpus with the character n-gram toy encoder.
    Embed(commands::EmbedArgs),
    /// Mine one language direction into a TSV of scored pairs.
    Mine(commands::MineArgs),
    /// Run the iterative mine-then-train loop from a config file.
    Run(commands::RunArgs),
    /// Top-1 retrieval accuracy against a ground-truth pairing.
    Eval(commands::EvalArgs),
    /// Write a synthetic multilingual world with known translations.
    Synth(commands::SynthArgs),
}

fn init_logging(verbose: u8) {
    let default = match verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    let filter = EnvFilter::try_from_default_env().unwrap_or_else(|_| EnvFilter::new(default));
    let _ = tracing_subscriber::fmt()
        .with_env_filter(filter)
        .with_writer(std::io::stderr)
        .try_init();
}

fn init_threads(threads: Option<usize>) -> CliResult<()> {
    let Some(n) = threads else {
        return Ok(());
    };
    if n == 0 {
        return Err(CliError::Usage("--threads must be at least 1".into()));
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Usage(format!("cannot start thread pool: {e}")))
}

fn dispatch(cli: &Cli) -> CliResult<()> {
    init_threads(cli.threads)?;
    match &cli.command {
        Command::Embed(a) => commands::embed(a),
        Command::Mine(a) => commands::mine(a),
        Command::Run(a) => commands::run(a),
        Command::Eval(a) => commands::eval(a),
        Command::Synth(a) => commands::synth(a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    init_logging(cli.verbose);
    match dispatch(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
