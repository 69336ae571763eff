//! Command-line surface: argument parsing, dispatch, and exit-code mapping.

pub mod commands;
pub mod config;
pub mod error;
pub mod govspec;
pub mod svg;

use std::ffi::OsString;

use clap::error::ErrorKind;
use clap::{Parser, Subcommand};

use crate::error::EXIT_USAGE;

#[derive(Debug, Parser)]
#[command(
    name = "govlab",
    version,
    about = "DVFS governor laboratory: simulate, train, compare, plot, bench"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run one episode under a governor and write its trace
    Run(commands::run::RunArgs),
    /// Train the learned governor; emit model files and training curves
    Train(commands::train::TrainArgs),
    /// Evaluate governors on one workload and tabulate energy outcomes
    Compare(commands::compare::CompareArgs),
    /// Render a trace or training-curve file to SVG
    Plot(commands::plot::PlotArgs),
    /// Measure inference latency of a trained model
    Bench(commands::bench::BenchArgs),
}

/// Parse and execute; returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => EXIT_USAGE,
            };
            let _ = e.print();
            return code;
        }
    };
    let result = match &cli.command {
        Command::Run(args) => commands::run::cmd_run(args),
        Command::Train(args) => commands::train::cmd_train(args),
        Command::Compare(args) => commands::compare::cmd_compare(args),
        Command::Plot(args) => commands::plot::cmd_plot(args),
        Command::Bench(args) => commands::bench::cmd_bench(args),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
