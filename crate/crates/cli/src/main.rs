//! Command-line front end: synthesize a toy corpus, protect sequences, and
//! evaluate protected probes against a gallery.

mod config;
mod evaluate;
mod protect;
mod staging;
mod synth;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::RunConfig;

/// Errors in how the tool was invoked, as opposed to errors in the data.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
}

#[derive(Parser, Debug)]
#[command(name = "gait-deid", version, about = "Gait silhouette de-identification")]
struct Cli {
    /// JSON config with flat dotted keys, e.g. {"protection.iterations": 50}.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Config override as key=value; repeatable, applied after --config.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    sets: Vec<String>,
    /// Log progress to stderr.
    #[arg(short, long, global = true)]
    verbose: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write a synthetic walker corpus.
    Synth(synth::SynthArgs),
    /// Protect one source/target pair or a batch of them.
    Protect(protect::ProtectArgs),
    /// Score protected probes against a gallery.
    Evaluate(evaluate::EvaluateArgs),
}

const EXIT_USAGE: u8 = 1;
const EXIT_DATA: u8 = 2;
const EXIT_NUMERICAL: u8 = 3;

fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if cause.downcast_ref::<CliError>().is_some() {
            return EXIT_USAGE;
        }
        if let Some(gait_deid::Error::NumericalAbort { .. }) = cause.downcast_ref::<gait_deid::Error>() {
            return EXIT_NUMERICAL;
        }
    }
    EXIT_DATA
}

fn run(cli: &Cli) -> anyhow::Result<()> {
    let cfg = RunConfig::load(cli.config.as_deref(), &cli.sets)?;
    match &cli.command {
        Command::Synth(a) => synth::run(a, cfg),
        Command::Protect(a) => protect::run(a, cfg),
        Command::Evaluate(a) => evaluate::run(a, cfg),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(EXIT_USAGE)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    env_logger::Builder::new()
        .filter_level(if cli.verbose {
            log::LevelFilter::Info
        } else {
            log::LevelFilter::Warn
        })
        .init();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
