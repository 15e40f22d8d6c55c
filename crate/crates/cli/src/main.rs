//! Experiment harness for elephant-random-walk escape times: exact dynamic
//! programming, parallel Monte Carlo, coupled-walk verification, tail fits,
//! quadratic-scaling analysis, and limit-process sampling, with CSV/JSON
//! reports that are byte-identical for a fixed config and seed at any thread
//! count.

mod commands;
mod common;

use clap::Parser;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "erw",
    version,
    about = "Escape-time experiments for the elephant random walk"
)]
struct Cli {
    #[command(subcommand)]
    command: commands::Command,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match commands::run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => ExitCode::from(err.report()),
    }
}
