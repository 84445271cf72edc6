//! `jpcp`: constraint-aware speaker diarization from the command line.

mod commands;

use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::{DiarizeArgs, EvalArgs, SimulateArgs, SweepArgs};

#[derive(Debug, Parser)]
#[command(name = "jpcp", version, about = "Constraint-aware spectral clustering for speaker diarization")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Cluster one session and write RTTM, labels and metrics.
    Diarize(DiarizeArgs),
    /// Generate a synthetic session in the manifest format.
    Simulate(SimulateArgs),
    /// Run a constraint-rate sweep over synthetic sessions.
    Sweep(SweepArgs),
    /// Score predicted labels or a transcript against a reference transcript.
    Eval(EvalArgs),
}

const EXIT_USAGE: u8 = 1;
const EXIT_DATA: u8 = 2;

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("JPCP_LOG", "warn")).init();

    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let outcome = match cli.command {
        Command::Diarize(args) => commands::diarize(&args),
        Command::Simulate(args) => commands::simulate(&args),
        Command::Sweep(args) => commands::sweep(&args),
        Command::Eval(args) => commands::eval(&args),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(if commands::is_usage_error(&e) { EXIT_USAGE } else { EXIT_DATA })
        }
    }
}
