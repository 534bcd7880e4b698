use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "gapsafe", version, about = "Sparse GLM path solver with Gap Safe screening")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve at a single λ and print a JSON summary.
    Solve(SolveArgs),
    /// Solve along a decreasing λ grid and write the results CSV.
    Path(PathArgs),
    /// Active fraction per rule, λ and epoch budget, as long-format CSV.
    Bench(BenchArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Model {
    Lasso,
    GroupLasso,
    Sgl,
    Logistic,
    Multitask,
    Multinomial,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Libsvm,
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Weights {
    Ones,
    SqrtSize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Normalize {
    None,
    UnitNorm,
    UnitVariance,
}

pub const RULE_NAMES: [&str; 8] = [
    "all",
    "none",
    "static",
    "gap-sequential",
    "gap-dynamic",
    "dst3",
    "strong",
    "sis",
];

#[derive(Debug, Clone, Args)]
pub struct DataArgs {
    /// Dataset file (LIBSVM or CSV).
    #[arg(long, value_name = "FILE", conflicts_with = "synthetic", required_unless_present = "synthetic")]
    pub data: Option<PathBuf>,
    /// Input format; inferred from the extension when omitted.
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    /// Leading CSV columns holding targets.
    #[arg(long, default_value_t = 1)]
    pub label_columns: usize,
    /// The CSV file starts with a header row.
    #[arg(long)]
    pub header: bool,

    /// Generate a seeded Gaussian problem instead of reading a file.
    #[arg(long)]
    pub synthetic: bool,
    #[arg(long, default_value_t = 100)]
    pub n_samples: usize,
    #[arg(long, default_value_t = 1000)]
    pub n_features: usize,
    /// Tasks or classes of a synthetic multi-output problem [default: 3].
    #[arg(long)]
    pub n_outputs: Option<usize>,
    /// Fraction of groups carrying signal in synthetic data.
    #[arg(long, default_value_t = 0.05)]
    pub support: f64,
    #[arg(long, default_value_t = 3.0)]
    pub snr: f64,

    #[arg(long, value_enum, default_value_t = Model::Lasso)]
    pub model: Model,
    /// File with one group label per feature, whitespace separated.
    #[arg(long, value_name = "FILE", conflicts_with = "group_size")]
    pub groups: Option<PathBuf>,
    /// Contiguous groups of this many features.
    #[arg(long)]
    pub group_size: Option<usize>,
    /// Sparse-Group Lasso mixing parameter in [0, 1].
    #[arg(long)]
    pub tau: Option<f64>,
    #[arg(long, value_enum, default_value_t = Weights::Ones)]
    pub weights: Weights,

    /// Subtract the target mean (regression models only).
    #[arg(long)]
    pub center_y: bool,
    /// Scale targets to unit variance (regression models only).
    #[arg(long)]
    pub scale_y: bool,
    /// Subtract column means; densifies sparse inputs.
    #[arg(long)]
    pub center_columns: bool,
    #[arg(long, value_enum, default_value_t = Normalize::None)]
    pub normalize: Normalize,

    /// Seed for synthetic data and for block shuffling.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Clone, Args)]
pub struct SolverArgs {
    /// Target duality gap before loss-dependent scaling.
    #[arg(long, default_value_t = 1e-6)]
    pub eps: f64,
    #[arg(long, default_value_t = 10_000)]
    pub max_epochs: usize,
    /// Epochs between gap evaluations and screening passes.
    #[arg(long, default_value_t = 10)]
    pub screen_every: usize,
    /// Use `eps` as an absolute gap target.
    #[arg(long)]
    pub no_scale_eps: bool,
    /// Visit blocks in a seeded random order each epoch.
    #[arg(long)]
    pub shuffle: bool,
}

#[derive(Debug, Clone, Args)]
pub struct GridArgs {
    #[arg(long, default_value_t = 100)]
    pub n_lambdas: usize,
    /// Grid span in decades below λ_max.
    #[arg(long, default_value_t = 3.0)]
    pub delta: f64,
    /// Explicit comma-separated decreasing λ values.
    #[arg(long, value_delimiter = ',', conflicts_with_all = ["n_lambdas", "delta"])]
    pub lambdas: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Args)]
pub struct SolveArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub solver: SolverArgs,
    #[arg(long, default_value = "gap-dynamic", value_parser = RULE_NAMES[1..].to_vec())]
    pub rule: String,
    #[arg(long, required_unless_present = "lambda_ratio", conflicts_with = "lambda_ratio")]
    pub lambda: Option<f64>,
    /// λ as a fraction of λ_max.
    #[arg(long)]
    pub lambda_ratio: Option<f64>,
    /// Write coefficients here.
    #[arg(long, value_name = "FILE")]
    pub coef_out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct PathArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub solver: SolverArgs,
    #[command(flatten)]
    pub grid: GridArgs,
    #[arg(long, default_value = "gap-dynamic", value_parser = RULE_NAMES.to_vec())]
    pub rule: String,
    #[arg(long, default_value = "plain", value_parser = ["plain", "active", "strong"])]
    pub warm_start: String,
    /// Results CSV; standard output when omitted.
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct BenchArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub solver: SolverArgs,
    #[command(flatten)]
    pub grid: GridArgs,
    #[arg(long, default_value = "all", value_parser = RULE_NAMES.to_vec())]
    pub rule: String,
    /// Comma-separated epoch budgets [default: 2,4,...,512].
    #[arg(long, value_delimiter = ',')]
    pub budgets: Option<Vec<usize>>,
    /// Bench CSV; standard output when omitted.
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
}
