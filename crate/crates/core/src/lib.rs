//! Unsupervised parallel-sentence mining over sentence embeddings.
//!
//! The crate covers the whole pipeline: monolingual [`corpus`] handling,
//! unit-normalized [`embeddings`] (with a toy n-gram embedder and a synthetic
//! multilingual generator), exact and approximate cosine [`index`]es, ratio
//! margin [`miner`], the iterative mine-then-align [`training`] loop, and
//! retrieval evaluation in [`evalkit`].

pub mod corpus;
pub mod embeddings;
pub mod error;
pub mod evalkit;
pub mod index;
pub mod miner;
pub mod training;

pub use error::{Error, FormatError, Result};
