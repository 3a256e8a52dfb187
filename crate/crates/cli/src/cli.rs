use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(
    name = "leadtime",
    version,
    about = "Lead-time quotation for a make-to-order queue with risk-averse customers"
)]
pub struct Cli {
    /// Worker threads for parallel work (defaults to all cores).
    #[arg(long, global = true, env = "LEADTIME_THREADS")]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve one or more problems and print the optimal policies.
    Solve(SolveArgs),
    /// Re-solve over a grid of one parameter.
    Sweep(SweepArgs),
    /// Quotes offered in each state under every optimal policy.
    QuoteTable(QuoteTableArgs),
    /// Simulate a policy and compare it with the analytic values.
    Simulate(SimulateArgs),
    /// Smallest service rate at which an empty-system customer joins.
    MinCapacity(MinCapacityArgs),
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    pub scenario: PathBuf,
    /// Comma-separated problem names, or `all`.
    #[arg(long, default_value = "all")]
    pub problem: String,
    #[arg(long)]
    pub csv: Option<PathBuf>,
    /// Save the policy (requires a single problem).
    #[arg(long)]
    pub policy_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    pub scenario: PathBuf,
    /// One of p, l, r, mu, lambda (else `sweep.axis`).
    #[arg(long)]
    pub axis: Option<String>,
    /// `start:stop:step` or a comma list (else `sweep.grid`).
    #[arg(long)]
    pub grid: Option<String>,
    /// Comma-separated problem names or `all` (else `sweep.problems`, else all).
    #[arg(long)]
    pub problems: Option<String>,
    /// Also simulate each optimal policy.
    #[arg(long)]
    pub with_sim: bool,
    #[command(flatten)]
    pub sim: SimArgs,
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct QuoteTableArgs {
    pub scenario: PathBuf,
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    pub scenario: PathBuf,
    /// Policy file written by `solve --policy-out`.
    #[arg(long, conflicts_with = "problem", required_unless_present = "problem")]
    pub policy: Option<PathBuf>,
    /// Solve this problem and simulate its optimal policy.
    #[arg(long)]
    pub problem: Option<String>,
    #[command(flatten)]
    pub sim: SimArgs,
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

/// Simulation settings; each falls back to the file's `sim.*` key, then to the default.
#[derive(Debug, Args, Default)]
pub struct SimArgs {
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub replications: Option<usize>,
    /// Events per replication.
    #[arg(long, conflicts_with = "time")]
    pub events: Option<u64>,
    /// Simulated time per replication.
    #[arg(long)]
    pub time: Option<f64>,
    /// Fraction of each replication discarded.
    #[arg(long)]
    pub warmup: Option<f64>,
    /// Batches per replication.
    #[arg(long)]
    pub batches: Option<usize>,
}

#[derive(Debug, Args)]
pub struct MinCapacityArgs {
    /// Scenario file; `mu` may be omitted.
    pub scenario: PathBuf,
    /// Quotes: `start:stop:step` or a comma list, `inf` allowed in lists.
    #[arg(long, default_value = "0:2:0.1")]
    pub d_grid: String,
    /// Comma-separated risk aversions (default: the file's `r`).
    #[arg(long)]
    pub r: Option<String>,
    #[arg(long)]
    pub csv: Option<PathBuf>,
}
