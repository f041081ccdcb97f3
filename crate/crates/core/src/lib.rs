//! Knowledge graph embeddings with Kronecker-decomposed DistMult variants.
//!
//! The crate covers the whole pipeline: triple ingestion ([`kg`]), dense
//! kernels ([`linalg`]), the three scoring models ([`model`]), losses
//! ([`loss`]), Adam ([`optim`]), a deterministic 1vsAll trainer
//! ([`trainer`]), checkpoints ([`checkpoint`]) and filtered link-prediction
//! metrics ([`eval`]).

pub mod checkpoint;
pub mod error;
pub mod eval;
pub mod gradcheck;
pub mod kg;
pub mod linalg;
pub mod loss;
pub mod model;
pub mod optim;
pub mod report;
pub mod rng;
pub mod trainer;

pub use checkpoint::Checkpoint;
pub use error::{Error, Result};
pub use eval::{evaluate, filtered_rank, EvalOptions, EvalReport, TieBreak};
pub use kg::{DatasetPaths, Split, Triple, TripleStore, Vocabulary};
pub use linalg::{DenseMatrix, DenseVector};
pub use loss::{LossKind, LossSpec};
pub use model::{param_count_for, Gradients, Mode, ModelState, Variant};
pub use optim::AdamState;
pub use trainer::{train, TrainConfig, TrainLog, Trainer};
