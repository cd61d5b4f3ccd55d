mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use docstruct::Error;

/// Train, evaluate and analyse structured attention models over documents.
#[derive(Debug, Parser)]
#[command(name = "docstruct", version, about)]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct GlobalArgs {
    /// Experiment configuration (flat `key = value` lines).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Overrides the configured number of runs.
    #[arg(long, global = true)]
    runs: Option<usize>,
    /// Output directory (or file, for single-report commands).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write a seeded synthetic corpus with stand-in embeddings.
    Synthesize {
        /// root-cue or ordering
        kind: String,
        #[arg(long, default_value_t = 1000)]
        size: usize,
    },
    /// Train `num_runs` seeded runs and keep each run's dev-best checkpoint.
    Train,
    /// Score a checkpoint on a corpus file.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        /// JSONL corpus; defaults to the configured analysis split.
        #[arg(long)]
        corpus: Option<PathBuf>,
    },
    /// Dump induced trees, tree statistics and root-word PPMI.
    Analyze {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        corpus: Option<PathBuf>,
    },
    /// Compare induced trees against reference trees.
    Compare {
        #[arg(long)]
        induced: PathBuf,
        #[arg(long)]
        gold: PathBuf,
        /// tsv (head arrays) or rst (bracketed nuclearity trees)
        #[arg(long, default_value = "tsv")]
        gold_format: String,
    },
    /// Words most associated with root sentences of a tree file.
    Ppmi {
        #[arg(long)]
        trees: PathBuf,
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        top_k: Option<usize>,
    },
}

fn exit_code(err: &Error) -> u8 {
    match err {
        Error::Config(_) => 1,
        Error::Numerical(_) => 3,
        _ => 2,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e);
            ExitCode::from(exit_code(&e))
        }
    }
}
