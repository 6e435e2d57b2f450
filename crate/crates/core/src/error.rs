//! Crate-wide error type.

use std::path::PathBuf;

/// Which of the two rates a group failed to define.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RateKind {
    /// True positive rate: undefined when the group has no positive labels.
    Tpr,
    /// False positive rate: undefined when the group has no negative labels.
    Fpr,
}

impl std::fmt::Display for RateKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            RateKind::Tpr => write!(f, "TPR"),
            RateKind::Fpr => write!(f, "FPR"),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("failed to read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("{dataset} csv header is missing expected column(s): {missing:?}")]
    HeaderMismatch {
        dataset: &'static str,
        missing: Vec<String>,
    },

    #[error("no rows left after cleaning")]
    EmptyAfterCleaning,

    #[error("cell probabilities must be nonnegative and sum to 1, got {got:?}")]
    InvalidCellProbabilities { got: [f64; 4] },

    #[error("invalid dataset: {0}")]
    InvalidDataset(String),

    #[error("cannot partition {n} samples across {k} clients")]
    TooManyClients { k: usize, n: usize },

    #[error("shard of {n} samples is too small to split")]
    ShardTooSmall { n: usize },

    #[error("train fraction must lie strictly between 0 and 1, got {0}")]
    InvalidTrainFraction(f64),

    #[error("shard {index} is empty")]
    EmptyShard { index: usize },

    #[error("need at least two shards, got {0}")]
    TooFewShards(usize),

    #[error("layer dims must be nonempty and end in 1, got {0:?}")]
    InvalidLayerDims(Vec<usize>),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("model shapes differ across client updates")]
    ShapeMismatch,

    #[error("client {client_id} has an empty training set")]
    EmptyTrainSet { client_id: usize },

    #[error("input vectors have mismatched lengths: {0:?}")]
    LengthMismatch(Vec<usize>),

    #[error("empty input")]
    EmptyInput,

    #[error("{rate} undefined for group {group}: no samples in the defining cell")]
    RateUndefined { group: u8, rate: RateKind },

    #[error("fairness unmeasurable: no samples with sensitive={group}, label={label}")]
    EmptyCell { group: u8, label: u8 },

    #[error("balanced accuracy undefined: labels contain a single class")]
    SingleClassLabels,

    #[error("linear program solver failed: {0}")]
    SolverFailure(String),

    #[error("fine-tuning needs at least two layers, model has {0}")]
    SingleLayerModel(usize),

    #[error("invalid config: {0}")]
    InvalidConfig(String),

    #[error(
        "no partition without an empty train (label, group) cell found in {attempts} attempts \
         (alpha={alpha}, k={k}, seed={seed})"
    )]
    DegeneratePartition {
        attempts: usize,
        alpha: f64,
        k: usize,
        seed: u64,
    },

    #[error("failed to encode report: {0}")]
    Serialize(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
