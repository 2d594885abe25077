//! `fdf`: train floating-discrete-filter model banks and evaluate the cascade.

mod commands;
mod config;
mod manifest;

use std::process::ExitCode;

use clap::{Parser, Subcommand};

const EXIT_CONFIG: u8 = 1;
const EXIT_DATA: u8 = 2;

#[derive(Debug, Parser)]
#[command(name = "fdf", version, about = "Floating discrete filter experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write filter-spec text and spiral point CSVs.
    GenKernel(commands::GenKernelArgs),
    /// Train the normal-filter baseline network.
    Train(commands::ConfigArgs),
    /// Train one network per equilibrium level.
    TrainBank(commands::ConfigArgs),
    /// Evaluate the cascade criteria over the configured thresholds.
    FdfEval(commands::ConfigArgs),
    /// Choose the most scattered filter order meeting the equilibrium constraint.
    Bilevel(commands::ConfigArgs),
    /// Render criteria CSVs as text tables.
    Report(commands::ReportArgs),
}

/// Data and model-file problems exit with 2, everything else with 1.
fn exit_code_for(err: &anyhow::Error) -> u8 {
    let core = err.chain().find_map(|e| e.downcast_ref::<fdf::Error>());
    match core {
        Some(fdf::Error::DataFormat(_) | fdf::Error::Checkpoint { .. } | fdf::Error::Bank(_) | fdf::Error::Io(_)) => {
            EXIT_DATA
        }
        _ => EXIT_CONFIG,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_CONFIG } else { 0 });
        }
    };
    let result = match &cli.command {
        Command::GenKernel(args) => commands::gen_kernel(args),
        Command::Train(args) => commands::train(args),
        Command::TrainBank(args) => commands::train_bank_cmd(args),
        Command::FdfEval(args) => commands::fdf_eval(args),
        Command::Bilevel(args) => commands::bilevel(args),
        Command::Report(args) => commands::report(args),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code_for(&err))
        }
    }
}
