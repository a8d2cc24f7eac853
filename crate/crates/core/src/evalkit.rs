//! Cross-lingual retrieval accuracy and mining statistics.
//!
//! Retrieval accuracy is the fraction of source sentences whose top-1
//! target, under either plain cosine or the ratio margin criterion, is the
//! known translation. Scoring always covers the full target set.

use std::collections::HashSet;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::embeddings::{dot, EmbeddingMatrix};
use crate::error::{Error, Result};
use crate::miner::{margin_from_parts, MinedSet, PairNeighborhoods};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Criterion {
    #[default]
    Cosine,
    Margin,
}

impl std::str::FromStr for Criterion {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cosine" => Ok(Criterion::Cosine),
            "margin" => Ok(Criterion::Margin),
            other => Err(Error::invalid(format!("unknown criterion {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Accuracy {
    pub correct: usize,
    pub n: usize,
}

impl Accuracy {
    pub fn value(&self) -> f64 {
        if self.n == 0 {
            0.0
        } else {
            self.correct as f64 / self.n as f64
        }
    }
}

/// Expected top-1 accuracy of a uniformly random guess among `n` targets.
pub fn chance_accuracy(n: usize) -> f64 {
    1.0 / n as f64
}

fn check_truth(
    src: &EmbeddingMatrix,
    tgt: &EmbeddingMatrix,
    truth: &[(usize, usize)],
) -> Result<()> {
    if src.dim() != tgt.dim() {
        return Err(Error::DimMismatch {
            left: src.dim(),
            right: tgt.dim(),
        });
    }
    if truth.is_empty() {
        return Err(Error::invalid("ground-truth pairing is empty"));
    }
    let mut seen_src = HashSet::new();
    let mut seen_tgt = HashSet::new();
    for &(s, t) in truth {
        if s >= src.len() || t >= tgt.len() {
            return Err(Error::invalid(format!(
                "truth pair ({s}, {t}) out of range for {} source and {} target rows",
                src.len(),
                tgt.len()
            )));
        }
        if !seen_src.insert(s) {
            return Err(Error::invalid(format!(
                "source row {s} appears twice in truth"
            )));
        }
        if !seen_tgt.insert(t) {
            return Err(Error::invalid(format!(
                "target row {t} appears twice in truth"
            )));
        }
    }
    Ok(())
}

/// Top-1 target of `query` over all rows of `tgt` under `score`; ties go to
/// the lower ordinal and unscorable targets are skipped.
fn top1(
    tgt: &EmbeddingMatrix,
    score: impl Fn(usize, f64) -> Option<f64>,
    query: &[f32],
) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (t, row) in tgt.rows().enumerate() {
        if let Some(s) = score(t, dot(query, row)) {
            if best.is_none_or(|(_, b)| s > b) {
                best = Some((t, s));
            }
        }
    }
    best.map(|(t, _)| t)
}

/// Top-1 retrieval accuracy of `src → tgt` over the rows listed in `truth`
/// (pairs of source and target ordinals).
pub fn retrieval_accuracy(
    src: &EmbeddingMatrix,
    tgt: &EmbeddingMatrix,
    truth: &[(usize, usize)],
    criterion: Criterion,
    k: usize,
) -> Result<Accuracy> {
    check_truth(src, tgt, truth)?;
    let correct = match criterion {
        Criterion::Cosine => truth
            .par_iter()
            .filter(|&&(s, t)| top1(tgt, |_, c| Some(c), src.row(s)) == Some(t))
            .count(),
        Criterion::Margin => {
            if k == 0 {
                return Err(Error::invalid("margin criterion needs k >= 1"));
            }
            let hoods = PairNeighborhoods::compute(src, tgt, k)?;
            let fsum = hoods.forward_sums();
            let bsum = hoods.backward_sums();
            truth
                .par_iter()
                .filter(|&&(s, t)| {
                    let score = |y: usize, c: f64| margin_from_parts(c, fsum[s], bsum[y], k);
                    top1(tgt, score, src.row(s)) == Some(t)
                })
                .count()
        }
    };
    Ok(Accuracy {
        correct,
        n: truth.len(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DirectionAccuracy {
    pub src: String,
    pub tgt: String,
    pub n: usize,
    pub correct: usize,
    pub accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetrievalReport {
    pub criterion: Criterion,
    pub k: usize,
    pub directions: Vec<DirectionAccuracy>,
    /// Mean of the per-direction accuracies.
    pub average: f64,
}

impl RetrievalReport {
    pub fn new(criterion: Criterion, k: usize, directions: Vec<DirectionAccuracy>) -> Self {
        let average = if directions.is_empty() {
            0.0
        } else {
            directions.iter().map(|d| d.accuracy).sum::<f64>() / directions.len() as f64
        };
        RetrievalReport {
            criterion,
            k,
            directions,
            average,
        }
    }

    pub fn direction(&self, src: &str, tgt: &str) -> Option<&DirectionAccuracy> {
        self.directions
            .iter()
            .find(|d| d.src == src && d.tgt == tgt)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut json = serde_json::to_string_pretty(self).map_err(|e| Error::Json {
            path: path.to_path_buf(),
            source: e,
        })?;
        json.push('\n');
        std::fs::write(path, json).map_err(|e| Error::io(path, e))
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::Json {
            path: path.to_path_buf(),
            source: e,
        })
    }
}

/// Accuracy for a single direction, as a report entry.
pub fn direction_accuracy(
    src_lang: &str,
    src: &EmbeddingMatrix,
    tgt_lang: &str,
    tgt: &EmbeddingMatrix,
    truth: &[(usize, usize)],
    criterion: Criterion,
    k: usize,
) -> Result<DirectionAccuracy> {
    let acc = retrieval_accuracy(src, tgt, truth, criterion, k)?;
    Ok(DirectionAccuracy {
        src: src_lang.to_owned(),
        tgt: tgt_lang.to_owned(),
        n: acc.n,
        correct: acc.correct,
        accuracy: acc.value(),
    })
}

/// Accuracy for every ordered pair of distinct languages, where row `i` of
/// each matrix translates row `i` of every other.
pub fn multiway_matrix(
    langs: &[(&str, &EmbeddingMatrix)],
    criterion: Criterion,
    k: usize,
) -> Result<RetrievalReport> {
    if langs.len() < 2 {
        return Err(Error::invalid(
            "multiway evaluation needs at least two languages",
        ));
    }
    let n = langs[0].1.len();
    if let Some((l, m)) = langs.iter().find(|(_, m)| m.len() != n) {
        return Err(Error::invalid(format!(
            "language {l} has {} rows, expected {n}",
            m.len()
        )));
    }
    let truth: Vec<(usize, usize)> = (0..n).map(|i| (i, i)).collect();
    let pairs: Vec<(usize, usize)> = (0..langs.len())
        .flat_map(|a| {
            (0..langs.len())
                .filter(move |&b| b != a)
                .map(move |b| (a, b))
        })
        .collect();
    let directions = pairs
        .par_iter()
        .map(|&(a, b)| {
            let (la, ma) = langs[a];
            let (lb, mb) = langs[b];
            direction_accuracy(la, ma, lb, mb, &truth, criterion, k)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(RetrievalReport::new(criterion, k, directions))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DirectionStats {
    pub src: String,
    pub tgt: String,
    pub count: usize,
    pub tau: f64,
    pub min: Option<f64>,
    pub median: Option<f64>,
    pub max: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MiningStats {
    pub directions: Vec<DirectionStats>,
}

impl MiningStats {
    pub fn total(&self) -> usize {
        self.directions.iter().map(|d| d.count).sum()
    }
}

/// Nearest-rank quantile of ascending `sorted` values, `p` in (0, 1].
pub fn nearest_rank(sorted: &[f64], p: f64) -> Option<f64> {
    if sorted.is_empty() {
        return None;
    }
    let rank = (p * sorted.len() as f64).ceil().max(1.0) as usize;
    Some(sorted[rank.min(sorted.len()) - 1])
}

pub fn mining_stats(sets: &[MinedSet]) -> MiningStats {
    let directions = sets
        .iter()
        .map(|set| {
            let mut scores: Vec<f64> = set.pairs.iter().map(|p| p.score).collect();
            scores.sort_by(f64::total_cmp);
            DirectionStats {
                src: set.src_lang.clone(),
                tgt: set.tgt_lang.clone(),
                count: scores.len(),
                tau: set.config.tau,
                min: scores.first().copied(),
                median: nearest_rank(&scores, 0.5),
                max: scores.last().copied(),
            }
        })
        .collect();
    MiningStats { directions }
}
