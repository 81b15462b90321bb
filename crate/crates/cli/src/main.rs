//! Command-line front end for the histogram-fingerprint search pipeline.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error, 3 invariant
//! violation.

mod cli_error;
mod commands;
mod config;
mod pipeline;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Parser, Subcommand};

use cli_error::{CliError, CliResult};
use config::Config;

#[derive(Debug, Parser)]
#[command(
    name = "plascan",
    version,
    about = "Locate audio clips in long recordings via histogram fingerprints \
             with piecewise-linear trajectory compression"
)]
struct Cli {
    /// Configuration file (TOML or JSON).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Seed for anything randomized (synthetic generation).
    #[arg(long, global = true, default_value_t = 42)]
    seed: u64,
    /// Worker threads (defaults to the number of cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic corpus with planted query clips.
    Gen(commands::gen_cmd::GenArgs),
    /// Train an LBG codebook from recordings.
    BuildCodebook(commands::codebook::BuildCodebookArgs),
    /// Build a search index from a stored recording.
    BuildIndex(commands::index::BuildIndexArgs),
    /// Search a query clip in an index.
    Search(commands::search_cmd::SearchArgs),
    /// Compare all engines over a query set and emit counters as CSV.
    Bench(commands::bench::BenchArgs),
    /// Load an index and re-check its invariants.
    ValidateIndex(commands::validate::ValidateArgs),
}

fn run(cli: &Cli) -> CliResult<()> {
    if let Some(threads) = cli.threads {
        if threads == 0 {
            return Err(CliError::usage("--threads must be at least 1"));
        }
        // Ignore the error when a pool already exists (tests, repeat calls).
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global();
    }
    let config = Config::load(cli.config.as_deref())?;
    match &cli.command {
        Command::Gen(args) => commands::gen_cmd::run(args, &config, cli.seed),
        Command::BuildCodebook(args) => commands::codebook::run(args, &config),
        Command::BuildIndex(args) => commands::index::run(args, &config),
        Command::Search(args) => commands::search_cmd::run(args, &config),
        Command::Bench(args) => commands::bench::run(args, &config),
        Command::ValidateIndex(args) => commands::validate::run(args),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            if matches!(err.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{err}");
                return ExitCode::SUCCESS;
            }
            eprintln!("{err}");
            return ExitCode::from(1);
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.exit_code() as u8)
        }
    }
}
