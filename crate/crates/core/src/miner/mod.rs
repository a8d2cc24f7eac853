//! Margin-based parallel sentence mining.
//!
//! For one language pair, [`mine_pair`] retrieves the k-nearest cross-lingual
//! neighbors of every sentence in both directions, lets each sentence pick
//! its best ratio-margin partner inside its neighborhood, and keeps the
//! candidates whose score clears the threshold.

mod margin;
mod plan;
mod tsv;

pub use margin::{
    margin_from_parts, margin_score, CandidateRule, MarginConfig, DEFAULT_K, DEFAULT_TAU,
    MIN_DENOMINATOR,
};
pub use plan::{mining_plan, DEFAULT_PIVOTS};
pub use tsv::{read_tsv, write_tsv, MinedRecord};

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use tracing::warn;

use crate::corpus::SentenceId;
use crate::embeddings::EmbeddingMatrix;
use crate::error::{Error, Result};
use crate::index::{build_flat, Neighborhood};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoredPair {
    pub src: SentenceId,
    pub tgt: SentenceId,
    /// Ratio margin score.
    pub score: f64,
    /// Raw cosine of the pair.
    pub cos: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MinedSet {
    pub src_lang: String,
    pub tgt_lang: String,
    pub config: MarginConfig,
    /// Descending score, then ascending source and target ordinal.
    pub pairs: Vec<ScoredPair>,
}

impl MinedSet {
    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }
}

/// One side of a mining job.
#[derive(Debug, Clone, Copy)]
pub struct Side<'a> {
    pub lang: &'a str,
    pub emb: &'a EmbeddingMatrix,
}

impl<'a> Side<'a> {
    pub fn new(lang: &'a str, emb: &'a EmbeddingMatrix) -> Self {
        Side { lang, emb }
    }
}

/// Neighborhoods in both directions for a language pair.
#[derive(Debug, Clone)]
pub struct PairNeighborhoods {
    /// Per source row, neighbors among target rows.
    pub forward: Vec<Neighborhood>,
    /// Per target row, neighbors among source rows.
    pub backward: Vec<Neighborhood>,
}

impl PairNeighborhoods {
    pub fn compute(src: &EmbeddingMatrix, tgt: &EmbeddingMatrix, k: usize) -> Result<Self> {
        if src.dim() != tgt.dim() {
            return Err(Error::DimMismatch {
                left: src.dim(),
                right: tgt.dim(),
            });
        }
        let forward = build_flat(tgt, shard_count(tgt.len()))?.search(src, k)?;
        let backward = build_flat(src, shard_count(src.len()))?.search(tgt, k)?;
        Ok(PairNeighborhoods { forward, backward })
    }

    pub fn forward_sums(&self) -> Vec<f64> {
        self.forward.iter().map(Neighborhood::cos_sum).collect()
    }

    pub fn backward_sums(&self) -> Vec<f64> {
        self.backward.iter().map(Neighborhood::cos_sum).collect()
    }
}

pub(crate) fn shard_count(rows: usize) -> usize {
    rayon::current_num_threads().clamp(1, rows.max(1))
}

fn better(a: &ScoredPair, b: &ScoredPair) -> bool {
    a.score > b.score || (a.score == b.score && (a.src, a.tgt) < (b.src, b.tgt))
}

/// Each row's best-margin partner within its neighborhood.
fn best_partners(
    hoods: &[Neighborhood],
    pair_of: impl Fn(usize, usize, f64) -> Option<ScoredPair> + Sync,
) -> Vec<ScoredPair> {
    hoods
        .par_iter()
        .enumerate()
        .filter_map(|(q, hood)| {
            hood.neighbors
                .iter()
                .filter_map(|h| pair_of(q, h.ordinal.index(), h.cos))
                .reduce(|best, p| if better(&p, &best) { p } else { best })
        })
        .collect()
}

/// Mines one language direction.
pub fn mine_pair(src: Side<'_>, tgt: Side<'_>, cfg: &MarginConfig) -> Result<MinedSet> {
    cfg.validate()?;
    let mut set = MinedSet {
        src_lang: src.lang.to_owned(),
        tgt_lang: tgt.lang.to_owned(),
        config: *cfg,
        pairs: Vec::new(),
    };
    if src.emb.dim() != tgt.emb.dim() {
        return Err(Error::DimMismatch {
            left: src.emb.dim(),
            right: tgt.emb.dim(),
        });
    }
    if src.emb.is_empty() || tgt.emb.is_empty() {
        warn!(
            src = src.lang,
            tgt = tgt.lang,
            "empty corpus; nothing to mine"
        );
        return Ok(set);
    }

    let hoods = PairNeighborhoods::compute(src.emb, tgt.emb, cfg.k)?;
    let fsum = hoods.forward_sums();
    let bsum = hoods.backward_sums();
    let k = cfg.k;
    let scored = |s: usize, t: usize, cos: f64| {
        margin_from_parts(cos, fsum[s], bsum[t], k).map(|score| ScoredPair {
            src: SentenceId::from(s),
            tgt: SentenceId::from(t),
            score,
            cos,
        })
    };

    let forward = best_partners(&hoods.forward, scored);
    let backward = best_partners(&hoods.backward, |t, s, cos| scored(s, t, cos));

    let mut candidates: BTreeMap<(SentenceId, SentenceId), (ScoredPair, u8)> = BTreeMap::new();
    for (p, side) in forward
        .into_iter()
        .map(|p| (p, 1u8))
        .chain(backward.into_iter().map(|p| (p, 2u8)))
    {
        candidates
            .entry((p.src, p.tgt))
            .and_modify(|e| e.1 |= side)
            .or_insert((p, side));
    }

    let mut pairs: Vec<ScoredPair> = candidates
        .into_values()
        .filter(|(_, sides)| match cfg.candidate_rule {
            CandidateRule::Union => true,
            CandidateRule::Intersection => *sides == 3,
        })
        .map(|(p, _)| p)
        .filter(|p| p.score >= cfg.tau && p.score > 0.0)
        .collect();
    sort_pairs(&mut pairs);
    if let Some(m) = cfg.max_pairs {
        pairs.truncate(m);
    }
    set.pairs = pairs;
    Ok(set)
}

/// Sorts by descending score, then ascending source and target ordinals.
pub fn sort_pairs(pairs: &mut [ScoredPair]) {
    pairs.sort_by(|a, b| {
        b.score
            .total_cmp(&a.score)
            .then(a.src.cmp(&b.src))
            .then(a.tgt.cmp(&b.tgt))
    });
}
