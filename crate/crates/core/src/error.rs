use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}:{line}: expected 3 tab-separated columns, found {found}")]
    Parse { path: PathBuf, line: usize, found: usize },
    #[error("training split is empty")]
    EmptyTrain,
    #[error("reciprocal relations were already added to this store")]
    ReciprocalsAlreadyAdded,
    #[error("pair (head {head}, relation {rel}) does not occur in the training split")]
    UnseenPair { head: usize, rel: usize },
    #[error("noise fraction must lie in (0, 1), got {0}")]
    NoiseFraction(f64),
    #[error("cannot sample {requested} noise triples: only {available} unused triples exist")]
    NoiseExhausted { requested: usize, available: usize },
    #[error("dimension mismatch: {0}")]
    Shape(String),
    #[error("embedding size {0} is not a perfect square")]
    NotPerfectSquare(usize),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("non-finite value: {0}")]
    NonFinite(String),
    #[error("target {target} out of range for {len} candidates")]
    TargetOutOfRange { target: usize, len: usize },
    #[error("training diverged at epoch {epoch}, batch {batch}: {loss} loss is {value}")]
    Diverged {
        epoch: usize,
        batch: usize,
        loss: String,
        value: f64,
    },
    #[error("checkpoint: bad magic header")]
    BadMagic,
    #[error("checkpoint: unsupported version {found} (expected {expected})")]
    VersionMismatch { found: u32, expected: u32 },
    #[error("checkpoint: checksum mismatch (file truncated or corrupt)")]
    Checksum,
    #[error("checkpoint: malformed content: {0}")]
    Malformed(String),
    #[error("model variant mismatch: checkpoint holds {found}, requested {requested}")]
    VariantMismatch { found: String, requested: String },
    #[error("vocabulary mismatch: {0}")]
    VocabMismatch(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// True for errors caused by bad or inconsistent input data.
    pub fn is_data_error(&self) -> bool {
        !matches!(
            self,
            Error::Diverged { .. } | Error::NonFinite(_) | Error::InvalidArgument(_)
        )
    }
}
