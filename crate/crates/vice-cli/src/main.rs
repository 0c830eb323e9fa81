//! Command-line entry points for training, evaluating, pruning, and
//! bounding triplet concept embeddings.
//!
//! Triplet files are UTF-8 text with one judgment per line: three 0-based
//! object indices `y z odd`, whitespace- or comma-separated, where `{y, z}`
//! is the chosen pair and `odd` the odd-one-out. `#` starts a comment line.
//!
//! Exit codes: 0 success, 2 configuration error, 3 data error,
//! 4 numerical divergence.

mod commands;
mod config;
mod files;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::Method;

/// A failure with the exit code it maps to.
#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub message: String,
}

impl CliError {
    pub fn config(message: String) -> Self {
        Self { code: 2, message }
    }

    pub fn data(message: String) -> Self {
        Self { code: 3, message }
    }

    pub fn numerical(message: String) -> Self {
        Self { code: 4, message }
    }

    /// Map a core error arising from data handling; divergence keeps its
    /// dedicated code.
    pub fn from_core(err: vice_core::Error) -> Self {
        match err {
            vice_core::Error::Diverged { .. } | vice_core::Error::NonFiniteGradient { .. } => {
                Self::numerical(err.to_string())
            }
            other => Self::data(other.to_string()),
        }
    }
}

#[derive(Parser)]
#[command(
    name = "vice",
    about = "Sparse non-negative concept embeddings from triplet odd-one-out judgments",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train one model per seed and write checkpoints and logs.
    Train(TrainArgs),
    /// Search the prior hyperparameter grid by mean validation
    /// cross-entropy.
    Grid(GridArgs),
    /// Score a checkpoint on a test set: accuracy, ceiling, mean KL.
    Evaluate(EvaluateArgs),
    /// Select dimensions and export the pruned embedding.
    Prune(PruneArgs),
    /// Retrospective generalization bounds over a quantization grid.
    Bound(BoundArgs),
    /// Generate synthetic ground truth and triplet data.
    Simulate(SimulateArgs),
    /// Top-k object labels per dimension of a pruned embedding.
    Report(ReportArgs),
}

#[derive(Args)]
struct TrainArgs {
    /// JSON run configuration; flags below override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Training triplet file.
    #[arg(long)]
    data: Option<PathBuf>,
    /// Number of objects the indices refer to.
    #[arg(long)]
    num_objects: Option<usize>,
    /// Predefined validation triplet file.
    #[arg(long)]
    val_data: Option<PathBuf>,
    /// Fraction of the data split off for validation.
    #[arg(long)]
    val_fraction: Option<f64>,
    /// Output directory for per-seed artifacts.
    #[arg(long)]
    output: Option<PathBuf>,
    /// Estimator to fit.
    #[arg(long, value_enum)]
    method: Option<Method>,
    /// Comma-separated seed list, e.g. 1,2,3.
    #[arg(long, value_delimiter = ',')]
    seeds: Option<Vec<u64>>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    max_epochs: Option<usize>,
    #[arg(long)]
    d_init: Option<usize>,
    #[arg(long)]
    stability_window: Option<usize>,
    /// Keep training to max_epochs even after convergence fires.
    #[arg(long)]
    no_stop_on_convergence: bool,
    #[arg(long)]
    pi_spike: Option<f64>,
    #[arg(long)]
    sigma_spike: Option<f64>,
    #[arg(long)]
    sigma_slab: Option<f64>,
    /// l1 strength for the MAP baseline.
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    eval_every: Option<usize>,
    /// Parallel worker count for multi-seed runs.
    #[arg(long)]
    jobs: Option<usize>,
}

#[derive(Args)]
struct GridArgs {
    /// JSON run configuration (the `grid` section defines the search
    /// space; omitted lists use the full default grid).
    #[arg(long)]
    config: PathBuf,
    /// Output directory for the grid table and the chosen combination.
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long)]
    jobs: Option<usize>,
}

#[derive(Args)]
struct EvaluateArgs {
    /// Trained checkpoint to score.
    #[arg(long)]
    checkpoint: PathBuf,
    /// Test triplet file.
    #[arg(long)]
    data: PathBuf,
    /// Monte-Carlo samples per triplet (variational checkpoints).
    #[arg(long, default_value_t = 50)]
    r_samples: usize,
    /// Sampling seed; falls back to VICE_SEED, then 0.
    #[arg(long)]
    seed: Option<u64>,
    /// Direction of the KL divergence.
    #[arg(long, value_parser = commands::parse_kl_direction, default_value = "human-model")]
    kl_direction: vice_core::eval::KlDirection,
    /// Where to write eval.json (defaults next to the checkpoint).
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct PruneArgs {
    /// Trained checkpoint to prune.
    #[arg(long)]
    checkpoint: PathBuf,
    /// Output directory for selection.csv, embedding.txt, kept_dims.json.
    #[arg(long)]
    output: PathBuf,
    /// FDR level for the significance counts.
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    /// A dimension needs strictly more significant objects than this.
    #[arg(long, default_value_t = 5)]
    reliability_threshold: usize,
    /// Count Benjamini-Hochberg rejections only, without the posterior
    /// mass filter (sensitivity analysis).
    #[arg(long)]
    bh_only: bool,
    /// Per-object l1 mass cutoff for MAP checkpoints.
    #[arg(long, default_value_t = 0.05)]
    mass_threshold: f64,
}

#[derive(Args)]
struct BoundArgs {
    /// Pruned embedding matrix (embedding.txt from `vice prune`).
    #[arg(long)]
    embedding: PathBuf,
    /// Triplet file the empirical error is measured on.
    #[arg(long)]
    data: PathBuf,
    /// Number of objects the indices refer to.
    #[arg(long)]
    num_objects: usize,
    /// Type I error budget for the whole quantization grid.
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    /// Comma-separated quantization scales; defaults to 0.05..=1.0 in
    /// steps of 0.05.
    #[arg(long, value_delimiter = ',')]
    deltas: Option<Vec<f64>>,
    /// Where to write bound.csv (defaults next to the embedding).
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long)]
    num_objects: usize,
    /// True dimensionality of the generator.
    #[arg(long)]
    dims: usize,
    /// Fraction of zero entries in the generating embedding.
    #[arg(long)]
    sparsity: f64,
    /// Number of triplet judgments to sample.
    #[arg(long)]
    num_triplets: usize,
    /// Generator seed; falls back to VICE_SEED, then 0.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory for triplets.txt and ground_truth.json.
    #[arg(long)]
    output: PathBuf,
}

#[derive(Args)]
struct ReportArgs {
    /// Pruned embedding matrix (embedding.txt from `vice prune`).
    #[arg(long, required_unless_present = "reproducibility")]
    embedding: Option<PathBuf>,
    /// Sidecar with the kept dimension indices (kept_dims.json).
    #[arg(long)]
    kept_dims: Option<PathBuf>,
    /// Object labels, one per line, in index order.
    #[arg(long, required_unless_present = "reproducibility")]
    labels: Option<PathBuf>,
    /// Labels reported per dimension.
    #[arg(long, default_value_t = 6)]
    topk: usize,
    /// Output format for the top-k report.
    #[arg(long, default_value = "text", value_parser = ["text", "csv"])]
    format: String,
    /// Instead of a top-k report, score dimension reproducibility across
    /// two or more pruned embedding matrices (comma-separated paths).
    #[arg(long, value_delimiter = ',', conflicts_with_all = ["embedding", "labels"])]
    reproducibility: Option<Vec<PathBuf>>,
    /// Write to a file instead of stdout.
    #[arg(long)]
    output: Option<PathBuf>,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Train(args) => commands::cmd_train(args),
        Command::Grid(args) => commands::cmd_grid(args),
        Command::Evaluate(args) => commands::cmd_evaluate(args),
        Command::Prune(args) => commands::cmd_prune(args),
        Command::Bound(args) => commands::cmd_bound(args),
        Command::Simulate(args) => commands::cmd_simulate(args),
        Command::Report(args) => commands::cmd_report(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {}", err.message);
            ExitCode::from(err.code)
        }
    }
}
