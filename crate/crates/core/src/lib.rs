//! Knowledge graph embeddings with complex-valued entity and relation
//! vectors, non-negative entity components, and approximate entailment
//! constraints between relations.
//!
//! The crate covers the whole experimental pipeline:
//!
//! - [`data`]: TSV datasets, vocabularies, the filtered-setting index and
//!   entailment files
//! - [`model`] and [`checkpoint`]: parameters, scoring, projection and the
//!   binary checkpoint format
//! - [`objective`]: the penalty-form loss and its sparse gradient
//! - [`train`]: negative sampling, AdaGrad and the training loop
//! - [`eval`]: filtered MRR / HITS@N and paired t-tests
//! - [`miner`]: length-1 rule mining with PCA confidence
//! - [`analysis`]: dimension purity, heatmap export and relation-pair
//!   diagnostics
//! - [`synthetic`]: seeded toy graphs

pub mod analysis;
pub mod checkpoint;
pub mod data;
pub mod error;
pub mod eval;
pub mod miner;
pub mod model;
pub mod objective;
pub mod synthetic;
pub mod train;

pub use checkpoint::Precision;
pub use data::{Dataset, Entailment, KnownIndex, Triple, Vocab};
pub use error::{KgError, Result};
pub use eval::EvalResult;
pub use miner::{MinedRule, PairClass};
pub use model::ModelParams;
pub use objective::{LossBreakdown, TrainingExample};
pub use train::{TrainConfig, TrainOutcome, Trainer};
