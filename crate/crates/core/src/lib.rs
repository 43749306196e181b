//! Word vectors trained by regressing target/context dot products directly
//! onto corpus PMI, plus diagnostics for the geometry of the result.
//!
//! Pipeline: [`corpus`] tokenizes and builds a vocabulary, [`cooccur`] counts
//! windowed pairs and builds the PMI matrix, [`trainer`] fits the vectors,
//! and [`eval`], [`geometry`] and [`contours`] inspect them.

pub mod contours;
pub mod cooccur;
pub mod corpus;
pub mod error;
pub mod eval;
pub mod geometry;
pub mod trainer;
pub mod vectors;

pub use cooccur::{build_pmi_matrix, CooccurrenceStats, PmiEntry, PmiMatrix};
pub use corpus::{TokenStream, Vocabulary};
pub use error::{Error, Result};
pub use trainer::{
    init_embeddings, train, train_with_counts, EmbeddingPair, EpochLoss, NegativeTarget, Optimizer, ParallelMode,
    TrainConfig, TrainOutput, Variant,
};
pub use vectors::Embeddings;
