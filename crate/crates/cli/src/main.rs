mod build_cfg;
mod eval;
mod options;
mod synth;
mod train;

use std::process::ExitCode;

use clap::{Parser, Subcommand};

use cfgnn::Exec;

/// Error carrying the process exit status.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub error: anyhow::Error,
}

impl Failure {
    /// Bad input or configuration.
    pub fn input(error: impl Into<anyhow::Error>) -> Self {
        Failure {
            code: 1,
            error: error.into(),
        }
    }

    /// Training or evaluation produced non-finite numbers.
    pub fn numerical(error: impl Into<anyhow::Error>) -> Self {
        Failure {
            code: 2,
            error: error.into(),
        }
    }
}

impl<E: Into<anyhow::Error>> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure::input(e)
    }
}

pub type CmdResult = Result<(), Failure>;

#[derive(Debug, Parser)]
#[command(name = "cfgnn", version, about = "Control flow graphs and DGCNN defect classifiers for compiled programs")]
struct Cli {
    /// More log output (repeatable).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,

    /// Run every stage on one thread.
    #[arg(long, global = true, env = "CFGNN_SEQUENTIAL", value_parser = clap::builder::BoolishValueParser::new())]
    sequential: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Extract instruction-level control flow graphs.
    BuildCfg(build_cfg::Args),
    /// Train a classifier on a labelled manifest.
    Train(train::Args),
    /// Evaluate a trained model on a labelled manifest.
    Eval(eval::Args),
    /// Generate a synthetic labelled corpus.
    Synth(synth::Args),
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .init();

    let exec = if cli.sequential { Exec::Sequential } else { Exec::default() };
    let result = match cli.command {
        Command::BuildCfg(args) => build_cfg::run(args, exec),
        Command::Train(args) => train::run(args, exec),
        Command::Eval(args) => eval::run(args, exec),
        Command::Synth(args) => synth::run(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {:#}", f.error);
            ExitCode::from(f.code)
        }
    }
}
