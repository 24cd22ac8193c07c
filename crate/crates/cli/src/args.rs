use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(
    name = "bellkit",
    version,
    about = "Three-qubit Bell-test analysis: GHZ predictions, local bounds and model comparison"
)]
pub struct Cli {
    /// JSON config file; keys are flag names (`shots`, `quantum-v`, ...). Flags win.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,

    /// Write the machine-readable report to FILE (`-` for stdout, replacing the table).
    #[arg(long, global = true, value_name = "FILE")]
    pub json: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Local (instruction-set) and algebraic bounds of a Bell expression.
    Bounds(BoundsArgs),
    /// Quantum correlations and Bell value of GHZ mixed with white noise.
    Quantum(QuantumArgs),
    /// Simulate a finite-statistics experiment and write its dataset.
    Simulate(SimulateArgs),
    /// Fit the noisy-GHZ and instruction-set families to data and compare.
    Compare(CompareArgs),
    /// Recompute the headline numbers and run the seeded comparison.
    Reproduce(ReproduceArgs),
}

#[derive(Debug, Args)]
pub struct ExpressionArgs {
    /// `mermin3` or a Bell-expression JSON file (`./mermin3` for a file of that name).
    #[arg(long)]
    pub expr: Option<String>,

    /// Settings assignment JSON file (per-party lists of Bloch vectors).
    #[arg(long, value_name = "FILE")]
    pub assignment: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BoundsArgs {
    #[command(flatten)]
    pub expression: ExpressionArgs,

    /// Maximum number of deterministic strategies to enumerate.
    #[arg(long)]
    pub cap: Option<u64>,
}

#[derive(Debug, Args)]
pub struct QuantumArgs {
    /// Visibility of the GHZ component, in [0, 1].
    #[arg(long = "v", visible_alias = "visibility", allow_hyphen_values = true)]
    pub v: Option<f64>,

    #[command(flatten)]
    pub expression: ExpressionArgs,

    /// Also search for the best settings by random-restart ascent.
    #[arg(long)]
    pub optimize: bool,

    #[arg(long)]
    pub restarts: Option<usize>,

    #[arg(long)]
    pub iterations: Option<usize>,

    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Simulate GHZ mixed with white noise at this visibility.
    #[arg(long, allow_hyphen_values = true)]
    pub quantum_v: Option<f64>,

    /// Simulate an instruction-set model: `uniform`, `vertex:N` or a model JSON file.
    #[arg(long, conflicts_with = "quantum_v")]
    pub lhv: Option<String>,

    #[arg(long)]
    pub shots: Option<u64>,

    /// Root seed (default 0).
    #[arg(long)]
    pub seed: Option<u64>,

    /// Dataset JSON output path.
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,

    /// Also write the estimated correlation table as CSV (i,j,k,E,stderr).
    #[arg(long, value_name = "FILE")]
    pub csv: Option<PathBuf>,

    #[command(flatten)]
    pub expression: ExpressionArgs,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    /// Dataset JSON, or a correlation CSV (`.csv`) with columns i,j,k,E,stderr.
    pub data: Option<PathBuf>,

    #[command(flatten)]
    pub expression: ExpressionArgs,

    #[arg(long)]
    pub max_iterations: Option<usize>,

    /// Duality-gap tolerance of the instruction-set fit.
    #[arg(long)]
    pub tolerance: Option<f64>,

    /// Report JSON path (default: next to the data, `<data>.report.json`).
    #[arg(long, value_name = "FILE")]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ReproduceArgs {
    /// Root seed of the simulated run (default 0).
    #[arg(long)]
    pub seed: Option<u64>,

    /// Shots per setting of the simulated run (default 100000).
    #[arg(long)]
    pub shots: Option<u64>,
}
