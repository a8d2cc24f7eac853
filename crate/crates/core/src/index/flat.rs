use std::ops::Range;

use rayon::prelude::*;
use tracing::warn;

use super::topk::{Hit, TopK};
use super::Neighborhood;
use crate::corpus::SentenceId;
use crate::embeddings::{dot, EmbeddingMatrix};
use crate::error::{Error, Result};

const QUERY_BLOCK: usize = 64;

/// Exact cosine index over an embedding matrix, split into contiguous shards.
#[derive(Debug, Clone)]
pub struct FlatIndex<'a> {
    target: &'a EmbeddingMatrix,
    shards: Vec<Range<usize>>,
}

/// Splits `0..n` into `shards` contiguous ranges whose sizes differ by at most
/// one, larger ranges first.
pub fn partition(n: usize, shards: usize) -> Vec<Range<usize>> {
    let shards = shards.max(1);
    let base = n / shards;
    let extra = n % shards;
    let mut start = 0;
    (0..shards)
        .map(|s| {
            let len = base + usize::from(s < extra);
            let r = start..start + len;
            start += len;
            r
        })
        .collect()
}

pub fn build_flat(target: &EmbeddingMatrix, shards: usize) -> Result<FlatIndex<'_>> {
    if shards == 0 {
        return Err(Error::invalid("shard count must be at least 1"));
    }
    let n = target.len();
    let shards = if shards > n.max(1) {
        warn!(shards, rows = n, "more shards than rows; clamping");
        n.max(1)
    } else {
        shards
    };
    Ok(FlatIndex {
        target,
        shards: partition(n, shards),
    })
}

pub(crate) fn clamp_k(k: usize, available: usize) -> usize {
    if k > available {
        warn!(k, available, "k exceeds index size; clamping");
        available
    } else {
        k
    }
}

pub(crate) fn check_dims(index_dim: usize, query_dim: usize) -> Result<()> {
    if index_dim != query_dim {
        return Err(Error::DimMismatch {
            left: index_dim,
            right: query_dim,
        });
    }
    Ok(())
}

impl<'a> FlatIndex<'a> {
    pub fn target(&self) -> &'a EmbeddingMatrix {
        self.target
    }

    pub fn shards(&self) -> &[Range<usize>] {
        &self.shards
    }

    pub fn len(&self) -> usize {
        self.target.len()
    }

    pub fn is_empty(&self) -> bool {
        self.target.is_empty()
    }

    fn scan(&self, query: &[f32], rows: Range<usize>, k: usize) -> TopK {
        let mut top = TopK::new(k);
        for r in rows {
            top.push(Hit::new(r, dot(query, self.target.row(r))));
        }
        top
    }

    /// Exact top-`k` neighbors of every query row.
    ///
    /// Work is split into (query block × shard) tasks; per-shard heaps are
    /// merged per query under the total rank order, so the result does not
    /// depend on scheduling.
    pub fn search(&self, queries: &EmbeddingMatrix, k: usize) -> Result<Vec<Neighborhood>> {
        check_dims(self.target.dim(), queries.dim())?;
        let k = clamp_k(k, self.len());
        let nq = queries.len();
        let blocks = nq.div_ceil(QUERY_BLOCK);
        let nshards = self.shards.len();

        let partials: Vec<Vec<TopK>> = (0..blocks * nshards)
            .into_par_iter()
            .map(|task| {
                let (block, shard) = (task / nshards, task % nshards);
                let q0 = block * QUERY_BLOCK;
                (q0..(q0 + QUERY_BLOCK).min(nq))
                    .map(|q| self.scan(queries.row(q), self.shards[shard].clone(), k))
                    .collect()
            })
            .collect();

        let neighborhoods = (0..nq)
            .into_par_iter()
            .map(|q| {
                let (block, offset) = (q / QUERY_BLOCK, q % QUERY_BLOCK);
                let mut merged = TopK::new(k);
                for shard in 0..nshards {
                    merged.extend(
                        partials[block * nshards + shard][offset]
                            .clone()
                            .into_sorted(),
                    );
                }
                Neighborhood {
                    query: SentenceId::from(q),
                    neighbors: merged.into_sorted(),
                }
            })
            .collect();
        Ok(neighborhoods)
    }
}

/// Free-function form of [`FlatIndex::search`].
pub fn search_flat(
    index: &FlatIndex<'_>,
    queries: &EmbeddingMatrix,
    k: usize,
) -> Result<Vec<Neighborhood>> {
    index.search(queries, k)
}
