//! Joint embeddings for words and their linguistic annotations.
//!
//! The pipeline projects annotated documents onto namespaced keys
//! (tokens, surface forms, lemmas, grammar tags, concepts), counts windowed
//! co-occurrences, and factorizes the PMI matrix shard by shard. The
//! resulting spaces can be merged and evaluated on similarity, analogy,
//! word-prediction and document classification tasks.

pub mod classify;
pub mod cooc;
pub mod corpus;
pub mod embedspace;
pub mod error;
pub mod evalanalogy;
pub mod evalpredict;
pub mod evalsim;
pub mod svd;
pub mod swivel;
pub mod vocab;

pub use error::{Error, Result};
