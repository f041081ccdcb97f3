use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use kronkge::{LossKind, TieBreak, Variant};

/// Dimensions searched by `--paper-grid`: every k² for k = 2..=20.
pub const SQUARE_GRID: [usize; 19] = [
    4, 9, 16, 25, 36, 49, 64, 81, 100, 121, 144, 169, 196, 225, 256, 289, 324, 361, 400,
];

#[derive(Debug, Parser)]
#[command(
    name = "kronkge",
    version,
    about = "Train and evaluate DistMult and its Kronecker-decomposed variants"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Index a dataset and write its binary cache and TSV splits.
    Preprocess(PreprocessArgs),
    /// Train one model and evaluate it.
    Train(TrainArgs),
    /// Evaluate a saved checkpoint.
    Evaluate(EvaluateArgs),
    /// Train and evaluate every (model, dim, loss, seed) combination.
    Sweep(SweepArgs),
    /// Train on a training split with injected random triples.
    Noise(TrainArgs),
    /// Compare analytic gradients with central finite differences.
    Gradcheck(GradcheckArgs),
    /// Rebuild Markdown tables (with averages) from report CSVs.
    Report(ReportArgs),
    /// Print trainable parameter counts.
    Params(ParamsArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Dataset {
    Umls,
    Kinship,
}

impl Dataset {
    pub fn name(self) -> &'static str {
        match self {
            Dataset::Umls => "umls",
            Dataset::Kinship => "kinship",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
pub enum ModelFlag {
    #[value(name = "distmult")]
    DistMult,
    #[value(name = "kd-rel")]
    KdRel,
    #[value(name = "kd-distmult")]
    KdDistMult,
}

impl From<ModelFlag> for Variant {
    fn from(m: ModelFlag) -> Self {
        match m {
            ModelFlag::DistMult => Variant::DistMult,
            ModelFlag::KdRel => Variant::KdRel,
            ModelFlag::KdDistMult => Variant::KdDistMult,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum LossFlag {
    Bce,
    Ls,
    Lr,
}

impl From<LossFlag> for LossKind {
    fn from(l: LossFlag) -> Self {
        match l {
            LossFlag::Bce => LossKind::Bce,
            LossFlag::Ls => LossKind::LabelSmoothing,
            LossFlag::Lr => LossKind::LabelRelaxation,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum TieFlag {
    Optimistic,
    Pessimistic,
}

impl From<TieFlag> for TieBreak {
    fn from(t: TieFlag) -> Self {
        match t {
            TieFlag::Optimistic => TieBreak::Optimistic,
            TieFlag::Pessimistic => TieBreak::Pessimistic,
        }
    }
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct DataArgs {
    /// Bundled benchmark; overridden by --train/--valid/--test.
    #[arg(long, value_enum, required_unless_present = "train")]
    pub dataset: Option<Dataset>,
    /// Training triples (TSV: head, relation, tail).
    #[arg(long, requires_all = ["valid", "test"])]
    pub train: Option<PathBuf>,
    #[arg(long, requires = "train")]
    pub valid: Option<PathBuf>,
    #[arg(long, requires = "train")]
    pub test: Option<PathBuf>,
    /// Add an inverse triple (t, r_inv, h) for every triple in every split.
    #[arg(long)]
    pub reciprocal: bool,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct HyperArgs {
    #[arg(long, default_value_t = 1000)]
    pub epochs: usize,
    #[arg(long, default_value_t = 0.01)]
    pub lr: f64,
    #[arg(long = "batch", default_value_t = 1024)]
    pub batch: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Smoothing or relaxation parameter for --loss ls|lr.
    #[arg(long, default_value_t = 0.1)]
    pub alpha: f64,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct EvalArgs {
    #[arg(long, value_enum, default_value_t = TieFlag::Optimistic)]
    pub tie: TieFlag,
    /// Also report metrics on the training split.
    #[arg(long)]
    pub eval_train: bool,
    /// Leave injected noise triples out of the ranking filter.
    #[arg(long)]
    pub exclude_noise_from_filter: bool,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct TrainArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long, value_enum, default_value_t = ModelFlag::DistMult)]
    pub model: ModelFlag,
    #[arg(long, default_value_t = 100)]
    pub dim: usize,
    #[arg(long, value_enum, default_value_t = LossFlag::Bce)]
    pub loss: LossFlag,
    #[command(flatten)]
    pub hyper: HyperArgs,
    /// Fraction of the training split to add as random noise triples.
    #[arg(long, default_value_t = 0.0)]
    pub fraction: f64,
    /// Validation MRR every this many epochs (0 = never).
    #[arg(long, default_value_t = 0)]
    pub eval_every: usize,
    /// Continue training from this checkpoint up to --epochs.
    #[arg(long)]
    pub resume: Option<PathBuf>,
    #[command(flatten)]
    pub eval: EvalArgs,
    /// Progress line on stderr every this many epochs (0 = silent).
    #[arg(long, default_value_t = 100)]
    pub log_every: usize,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[command(flatten)]
    pub data: DataArgs,
    /// Refuse checkpoints of another model.
    #[arg(long, value_enum)]
    pub model: Option<ModelFlag>,
    #[command(flatten)]
    pub eval: EvalArgs,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SweepArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long = "model", value_enum, value_delimiter = ',', default_values_t = [ModelFlag::DistMult, ModelFlag::KdRel, ModelFlag::KdDistMult])]
    pub models: Vec<ModelFlag>,
    /// Comma-separated embedding sizes.
    #[arg(long = "dim", value_delimiter = ',', required_unless_present = "paper_grid")]
    pub dims: Vec<usize>,
    /// Sweep every k² for k = 2..=20.
    #[arg(long)]
    pub paper_grid: bool,
    #[arg(long = "loss", value_enum, value_delimiter = ',', default_values_t = [LossFlag::Bce])]
    pub losses: Vec<LossFlag>,
    #[arg(long = "seeds", value_delimiter = ',', default_values_t = [1u64])]
    pub seeds: Vec<u64>,
    #[arg(long, default_value_t = 1000)]
    pub epochs: usize,
    #[arg(long, default_value_t = 0.01)]
    pub lr: f64,
    #[arg(long = "batch", default_value_t = 1024)]
    pub batch: usize,
    #[arg(long, default_value_t = 0.1)]
    pub alpha: f64,
    #[arg(long, default_value_t = 0.0)]
    pub fraction: f64,
    /// Runs trained concurrently.
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
    #[command(flatten)]
    pub eval: EvalArgs,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct GradcheckArgs {
    /// Comma-separated embedding sizes (perfect squares).
    #[arg(long = "dim", value_delimiter = ',', default_values_t = [4usize, 16])]
    pub dims: Vec<usize>,
    #[arg(long, default_value_t = 20)]
    pub trials: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long, default_value_t = 0.1)]
    pub alpha: f64,
    /// Negate the analytic gradients (harness self-test).
    #[arg(long, hide = true)]
    pub flip_sign: bool,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ReportArgs {
    /// Report CSVs written by train, sweep or noise.
    #[arg(required = true)]
    pub inputs: Vec<PathBuf>,
    /// Write report.csv and report.md here instead of printing Markdown.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ParamsArgs {
    #[arg(long, value_enum, required_unless_present_all = ["entities", "relations"])]
    pub dataset: Option<Dataset>,
    #[arg(long, requires = "relations")]
    pub entities: Option<usize>,
    #[arg(long, requires = "entities")]
    pub relations: Option<usize>,
    #[arg(long = "model", value_enum, value_delimiter = ',', default_values_t = [ModelFlag::DistMult, ModelFlag::KdRel, ModelFlag::KdDistMult])]
    pub models: Vec<ModelFlag>,
    #[arg(long = "dim", value_delimiter = ',', required_unless_present = "paper_grid")]
    pub dims: Vec<usize>,
    #[arg(long)]
    pub paper_grid: bool,
    #[arg(long)]
    pub reciprocal: bool,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct PreprocessArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
}
