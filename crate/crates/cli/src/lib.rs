//! Command-line front end: scenario and policy files, reports and CSV output.

pub mod cli;
pub mod commands;
pub mod output;
pub mod policy_file;
pub mod scenario_file;

use anyhow::Result;

pub use cli::{Cli, Command};

/// Runs one command and returns its terminal report.
pub fn run(command: &Command) -> Result<String> {
    match command {
        Command::Solve(a) => commands::solve_cmd(a),
        Command::Sweep(a) => commands::sweep_cmd(a),
        Command::QuoteTable(a) => commands::quote_table_cmd(a),
        Command::Simulate(a) => commands::simulate_cmd(a),
        Command::MinCapacity(a) => commands::min_capacity_cmd(a),
    }
}

/// Process exit code for an error: 2 when the service rate cannot support
/// any customer, 1 otherwise.
pub fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<leadtime_core::Error>() {
        Some(leadtime_core::Error::InfeasibleService { .. }) => 2,
        _ => 1,
    }
}
