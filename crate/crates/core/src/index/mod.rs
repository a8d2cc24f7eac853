//! Cosine k-nearest-neighbor search.
//!
//! [`FlatIndex`] is exact and is the default everywhere. [`IvfIndex`] trades
//! recall for speed by probing only the lists closest to each query.
//!
//! All results follow one total order: cosine descending, then target ordinal
//! ascending. Results are therefore identical across shard counts, thread
//! counts and platforms.

mod flat;
mod ivf;
mod topk;

pub use flat::{build_flat, partition, search_flat, FlatIndex};
pub use ivf::{build_ivf, search_ivf, IvfIndex};
pub use topk::{rank_cmp, Hit, TopK};

use serde::{Deserialize, Serialize};

use crate::corpus::SentenceId;

/// Top-k cross-lingual neighbors of one query row, best first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Neighborhood {
    pub query: SentenceId,
    pub neighbors: Vec<Hit>,
}

impl Neighborhood {
    pub fn cos_sum(&self) -> f64 {
        self.neighbors.iter().map(|h| h.cos).sum()
    }
}
