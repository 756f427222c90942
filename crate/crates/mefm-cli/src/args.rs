//! Command-line surface.

use clap::{Args, Parser, Subcommand, ValueEnum};
use mefm::dafl::{TuningConfig, TuningMode};
use std::path::PathBuf;

#[derive(Parser, Debug)]
#[command(
    name = "mefm",
    version,
    about = "Sparse main-effect matrix factor models: simulation, estimation, evaluation",
    subcommand_required = true,
    arg_required_else_help = true
)]
pub struct Cli {
    /// Master seed (overrides the seed in a scenario or config file).
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// Worker threads for parallel sections (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    /// Output directory (simulate, fit, experiment) or report file (evaluate).
    #[arg(short, long, global = true)]
    pub output: Option<PathBuf>,

    /// On-disk format for tensor files.
    #[arg(long, global = true, value_enum)]
    pub format: Option<FileFormat>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Draw a synthetic dataset and write it together with its ground truth.
    Simulate(SimulateArgs),
    /// Estimate the model from an observation tensor.
    Fit(FitArgs),
    /// Score estimate files against truth files into a JSON report.
    Evaluate(EvaluateArgs),
    /// Run simulate → fit → evaluate over many replications and aggregate.
    Experiment(ExperimentArgs),
    /// Print the stationary-law constants of the sparse-effect chain.
    Oracles(OraclesArgs),
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum FileFormat {
    /// Long-form CSV `t,i,j,value` with 1-based indices.
    Csv,
    /// Compact binary (magic "MEFM", version, dims, row-major doubles).
    Bin,
}

#[derive(Args, Debug)]
pub struct ScenarioSource {
    /// Built-in scenario name (see the error message for the list).
    #[arg(long, conflicts_with = "config")]
    pub scenario: Option<String>,

    /// Configuration file of `key = value` lines.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub source: ScenarioSource,

    /// Replication index (selects the random stream block); overrides the
    /// configuration's value when given.
    #[arg(long)]
    pub rep: Option<u64>,
}

#[derive(Args, Debug)]
pub struct FitArgs {
    /// Observation tensor (.csv or .bin).
    #[arg(long)]
    pub input: PathBuf,

    /// Number of row factors.
    #[arg(long)]
    pub k_r: usize,

    /// Number of column factors.
    #[arg(long)]
    pub k_c: usize,

    #[command(flatten)]
    pub tuning: TuningArgs,
}

#[derive(Args, Debug)]
pub struct EvaluateArgs {
    /// Directory of estimate files as written by `fit`.
    #[arg(long)]
    pub estimates: PathBuf,

    /// Directory of truth files as written by `simulate`.
    #[arg(long)]
    pub truth: PathBuf,

    /// Scenario label recorded in the report.
    #[arg(long, default_value = "custom")]
    pub scenario: String,
}

#[derive(Args, Debug)]
pub struct ExperimentArgs {
    #[command(flatten)]
    pub source: ScenarioSource,

    /// Number of replications.
    #[arg(long)]
    pub reps: u64,

    /// Reuse per-replication reports already on disk.
    #[arg(long)]
    pub resume: bool,

    #[command(flatten)]
    pub tuning: TuningArgs,
}

#[derive(Args, Debug)]
pub struct OraclesArgs {
    /// Stay probability of the sparse (zero) state.
    #[arg(long)]
    pub pi_s: f64,

    /// Stay probability of the dense state.
    #[arg(long)]
    pub pi_b: f64,
}

#[derive(Args, Debug)]
pub struct TuningArgs {
    /// Number of penalty levels on the log-spaced grid.
    #[arg(long, default_value_t = 30)]
    pub grid_size: usize,

    /// Lower grid bound.
    #[arg(long, default_value_t = 1e-4)]
    pub lambda_min: f64,

    /// Upper grid bound (default: data-driven).
    #[arg(long)]
    pub lambda_max: Option<f64>,

    /// Solver certificate tolerance.
    #[arg(long, default_value_t = 1e-8)]
    pub tol: f64,

    /// Whether each series gets its own penalty level or one shared per
    /// effect family.
    #[arg(long, value_enum, default_value_t = TuningChoice::PerIndex)]
    pub tuning: TuningChoice,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum TuningChoice {
    PerIndex,
    Aggregated,
}

impl TuningArgs {
    pub fn to_config(&self) -> TuningConfig {
        TuningConfig {
            grid_size: self.grid_size,
            lambda_min: self.lambda_min,
            lambda_max: self.lambda_max,
            tol: self.tol,
            mode: match self.tuning {
                TuningChoice::PerIndex => TuningMode::PerIndex,
                TuningChoice::Aggregated => TuningMode::Aggregated,
            },
        }
    }
}
