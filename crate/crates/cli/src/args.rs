use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use slpca::batch::BatchConfig;
use slpca::io::TimestampColumn;
use slpca::{Hyperparams, ScheduleKind};

#[derive(Debug, Parser)]
#[command(name = "slpca", version, about = "Batch and streaming logistic PCA for binary data")]
pub struct Cli {
    /// Worker threads for the batch row solves and curve evaluation (0 = all cores).
    #[arg(long, global = true, default_value_t = 0)]
    pub workers: usize,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic binary data set as CSV.
    Simulate(SimulateArgs),
    /// Fit the batch model by alternating minimization.
    FitBatch(FitBatchArgs),
    /// Stream the rows once and write the per-step trace.
    FitStream(FitStreamArgs),
    /// Compute the loss functionals, the regret gap and optional prefix curves.
    Evaluate(EvaluateArgs),
    /// Turn fitted factors back into binary states.
    Reconstruct(ReconstructArgs),
    /// Check every per-step inequality; exits 1 when a gating check fails.
    CheckBounds(CheckBoundsArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Generator {
    /// Columns share a common Bernoulli draw with the mixing probability.
    Correlated,
    /// Appliance-style daily on/off pattern.
    DayNight,
    /// Rank-r logistic model with a planted score/loading pair.
    Planted,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long, value_enum, default_value_t = Generator::Correlated)]
    pub generator: Generator,
    #[arg(long)]
    pub out: PathBuf,
    /// Rows to generate (default 1000, or 2016 for day-night).
    #[arg(long)]
    pub n: Option<usize>,
    /// Binary columns (default 8, or 6 for day-night).
    #[arg(long)]
    pub p: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 0.5)]
    pub marginal_p: f64,
    #[arg(long, default_value_t = 0.7)]
    pub mixing_prob: f64,
    /// Samples per day.
    #[arg(long, default_value_t = 144)]
    pub period: usize,
    #[arg(long, default_value_t = 0.85)]
    pub day_on_prob: f64,
    #[arg(long, default_value_t = 0.1)]
    pub night_on_prob: f64,
    #[arg(long, default_value_t = 0.5)]
    pub day_fraction: f64,
    /// Rank of the planted model.
    #[arg(long, default_value_t = 1)]
    pub rank: usize,
    /// Smallest |natural parameter| of the planted model.
    #[arg(long, default_value_t = 4.0)]
    pub magnitude: f64,
    #[arg(long, default_value_t = 1.0)]
    pub fraction: f64,
}

#[derive(Debug, Args)]
pub struct DataArgs {
    /// Binary CSV: header row, optional leading timestamp column, then 0/1 cells.
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, value_enum, default_value_t = TimestampArg::Auto)]
    pub timestamp: TimestampArg,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum TimestampArg {
    /// A first header named t, ts, time, timestamp, date, datetime or index.
    Auto,
    Present,
    Absent,
}

impl From<TimestampArg> for TimestampColumn {
    fn from(t: TimestampArg) -> Self {
        match t {
            TimestampArg::Auto => TimestampColumn::Auto,
            TimestampArg::Present => TimestampColumn::Present,
            TimestampArg::Absent => TimestampColumn::Absent,
        }
    }
}

#[derive(Debug, Args)]
pub struct SolverArgs {
    /// Score penalty weight.
    #[arg(long, default_value_t = 0.1)]
    pub gamma: f64,
    /// Loading penalty weight (batch only).
    #[arg(long, default_value_t = 0.1)]
    pub lambda: f64,
    #[arg(long, default_value_t = 1e-14)]
    pub newton_tol: f64,
    #[arg(long, default_value_t = 0.3)]
    pub armijo_alpha: f64,
    #[arg(long, default_value_t = 0.5)]
    pub armijo_beta: f64,
    #[arg(long, default_value_t = 1.0)]
    pub initial_step: f64,
    #[arg(long, default_value_t = 100)]
    pub max_newton_iterations: usize,
    #[arg(long, default_value_t = 60)]
    pub max_backtracks: usize,
}

impl SolverArgs {
    pub fn params(&self, schedule_constant: f64) -> Hyperparams {
        Hyperparams {
            gamma: self.gamma,
            lambda: self.lambda,
            newton_tol: self.newton_tol,
            armijo_alpha: self.armijo_alpha,
            armijo_beta: self.armijo_beta,
            initial_step: self.initial_step,
            schedule_constant,
            max_newton_iterations: self.max_newton_iterations,
            max_backtracks: self.max_backtracks,
        }
    }
}

#[derive(Debug, Args)]
pub struct FitBatchArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// Output JSON with scores, loadings and the objective history.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 1)]
    pub rank: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 500)]
    pub max_alternations: usize,
    /// Relative objective decrease that ends the alternation.
    #[arg(long, default_value_t = 1e-8)]
    pub tol: f64,
    #[command(flatten)]
    pub solver: SolverArgs,
}

impl FitBatchArgs {
    pub fn config(&self) -> BatchConfig {
        BatchConfig {
            rank: self.rank,
            max_alternations: self.max_alternations,
            tol: self.tol,
            seed: self.seed,
            ..BatchConfig::default()
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ScheduleArg {
    Diminishing,
    Constant,
}

impl From<ScheduleArg> for ScheduleKind {
    fn from(s: ScheduleArg) -> Self {
        match s {
            ScheduleArg::Diminishing => ScheduleKind::Diminishing,
            ScheduleArg::Constant => ScheduleKind::Constant,
        }
    }
}

#[derive(Debug, Args)]
pub struct FitStreamArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// JSON-lines trace; `.meta.json` and `.snapshots.json` sidecars go next to it.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 1)]
    pub rank: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum, default_value_t = ScheduleArg::Diminishing)]
    pub schedule: ScheduleArg,
    /// Step-size constant C: η_t = C/√t or η_t = C.
    #[arg(long = "step-constant", default_value_t = 0.2)]
    pub step_constant: f64,
    /// Keep the loadings seen by every step (needed for the surrogate loss
    /// and regret-paired reconstruction).
    #[arg(long)]
    pub snapshots: bool,
    #[command(flatten)]
    pub solver: SolverArgs,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long)]
    pub trace: PathBuf,
    /// Batch fit from `fit-batch`; required for the batch curve.
    #[arg(long)]
    pub batch: Option<PathBuf>,
    /// Write per-prefix curves (t, C_t, Chat_t, Regret_t) to this CSV.
    #[arg(long)]
    pub curves: Option<PathBuf>,
    /// Scalar report JSON (defaults to the curve file with a .json extension).
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    pub stride: usize,
    /// Refit the batch model on every curve prefix. Quadratic in N.
    #[arg(long)]
    pub refit: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum PairingArg {
    Batch,
    SequentialFinal,
    Regret,
    All,
}

#[derive(Debug, Args)]
pub struct ReconstructArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long)]
    pub batch: Option<PathBuf>,
    #[arg(long)]
    pub trace: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = PairingArg::All)]
    pub pairing: PairingArg,
    /// Directory for `<pairing>.csv`, `aggregate.csv` and `hamming.csv`.
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct CheckBoundsArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long)]
    pub trace: PathBuf,
    /// Batch fit; enables the batch-below-sequential check.
    #[arg(long)]
    pub batch: Option<PathBuf>,
    /// Write the full report as JSON.
    #[arg(long)]
    pub out: Option<PathBuf>,
}
