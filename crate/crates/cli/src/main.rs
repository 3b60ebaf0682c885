//! `battdispatch`: characterize a battery, solve dispatch cases and assess
//! schedule reliability.

mod characterize;
mod dispatch;
mod error;
mod provenance;
mod reliability;
mod testcase;

use clap::{Parser, Subcommand};

use crate::error::CliResult;

#[derive(Debug, Parser)]
#[command(name = "battdispatch", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Sample envelopes, measure their error and dump limit and surface tables.
    Characterize(characterize::CharacterizeArgs),
    /// Build and solve network-constrained dispatch cases.
    Dispatch(dispatch::DispatchArgs),
    /// Clip a schedule to the true limits and measure the energy imbalance.
    Reliability(reliability::ReliabilityArgs),
    /// Write the synthetic 24-bus case.
    MakeTestcase(testcase::TestCaseArgs),
}

fn run(cli: &Cli) -> CliResult<()> {
    match &cli.command {
        Command::Characterize(a) => characterize::run(a),
        Command::Dispatch(a) => dispatch::run(a),
        Command::Reliability(a) => reliability::run(a),
        Command::MakeTestcase(a) => testcase::run(a),
    }
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("BATTDISPATCH_LOG", "info")).init();
    let cli = Cli::parse();
    if let Err(e) = run(&cli) {
        eprintln!("{}", e.to_json());
        std::process::exit(e.exit_code());
    }
}
