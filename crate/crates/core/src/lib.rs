//! Cross-language word clusters for named-entity tagging.
//!
//! The pipeline has four stages, each its own module:
//!
//! * [`corpus`] — CoNLL-style labeled data, plain unlabeled corpora,
//!   vocabularies and bigram statistics.
//! * [`clustering`] — greedy exchange clustering of a vocabulary into K
//!   classes maximizing the average mutual information of class bigrams.
//! * [`merge`] — combining a target-language clustering with clusterings of
//!   other languages that share its script.
//! * [`crf`] — a linear-chain CRF tagger whose feature set includes the
//!   cluster ids of context words.
//! * [`eval`] — phrase-level precision/recall/F1, per-category deltas,
//!   exact McNemar significance tests, and OOV-coverage reports.
//!
//! Numeric kernels are generic over [`Scalar`]; the command-line tools and
//! all on-disk formats use [`Float`].

pub mod clustering;
pub mod corpus;
pub mod crf;
pub mod eval;
pub mod merge;

mod error;
mod scalar;

pub use error::{Error, Result};
pub use scalar::Scalar;

/// Scalar type used by the command-line tools and on-disk formats.
pub type Float = f64;
