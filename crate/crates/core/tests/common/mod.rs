//! Naive reference implementations used as test oracles.
//!
//! Everything here is written as plainly as possible and shares no code
//! with the library beyond the matrix type.

#![allow(dead_code, clippy::needless_range_loop)]

use bitext_core::embeddings::EmbeddingMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn random_matrix(n: usize, dim: usize, seed: u64) -> EmbeddingMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let raw: Vec<f64> = (0..n * dim).map(|_| rng.sample(StandardNormal)).collect();
    EmbeddingMatrix::normalize(dim, &raw).unwrap()
}

/// Sequential double-precision dot product.
pub fn naive_dot(a: &[f32], b: &[f32]) -> f64 {
    let mut s = 0.0f64;
    for i in 0..a.len() {
        s += a[i] as f64 * b[i] as f64;
    }
    s
}

/// Top-k `(ordinal, cos)` by full scan: cosine descending, lower ordinal on ties.
pub fn naive_knn(query: &[f32], targets: &EmbeddingMatrix, k: usize) -> Vec<(usize, f64)> {
    let mut all: Vec<(usize, f64)> = (0..targets.len())
        .map(|j| (j, naive_dot(query, targets.row(j))))
        .collect();
    all.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
    all.truncate(k);
    all
}

/// Ratio margin written out term by term.
pub fn naive_margin(
    x: &[f32],
    y: &[f32],
    x_hood: &[(usize, f64)],
    y_hood: &[(usize, f64)],
    k: usize,
) -> Option<f64> {
    let mut denom = 0.0;
    for &(_, c) in x_hood {
        denom += c / (2.0 * k as f64);
    }
    let mut right = 0.0;
    for &(_, c) in y_hood {
        right += c / (2.0 * k as f64);
    }
    denom += right;
    if denom <= 1e-9 {
        return None;
    }
    Some(naive_dot(x, y) / denom)
}

/// Brute-force mining: each row's best margin partner in its neighborhood,
/// union or intersection of both directions, thresholded and sorted.
/// Returns `(src, tgt, score)`.
pub fn naive_mine(
    src: &EmbeddingMatrix,
    tgt: &EmbeddingMatrix,
    k: usize,
    tau: f64,
    intersection: bool,
) -> Vec<(usize, usize, f64)> {
    let src_hoods: Vec<_> = (0..src.len())
        .map(|i| naive_knn(src.row(i), tgt, k))
        .collect();
    let tgt_hoods: Vec<_> = (0..tgt.len())
        .map(|j| naive_knn(tgt.row(j), src, k))
        .collect();
    let score =
        |i: usize, j: usize| naive_margin(src.row(i), tgt.row(j), &src_hoods[i], &tgt_hoods[j], k);

    let pick = |cands: Vec<(usize, usize)>| -> Option<(usize, usize, f64)> {
        let mut best: Option<(usize, usize, f64)> = None;
        for (i, j) in cands {
            if let Some(s) = score(i, j) {
                let better = match best {
                    None => true,
                    Some((bi, bj, bs)) => s > bs || (s == bs && (i, j) < (bi, bj)),
                };
                if better {
                    best = Some((i, j, s));
                }
            }
        }
        best
    };

    let mut forward = Vec::new();
    for i in 0..src.len() {
        if let Some(p) = pick(src_hoods[i].iter().map(|&(j, _)| (i, j)).collect()) {
            forward.push(p);
        }
    }
    let mut backward = Vec::new();
    for j in 0..tgt.len() {
        if let Some(p) = pick(tgt_hoods[j].iter().map(|&(i, _)| (i, j)).collect()) {
            backward.push(p);
        }
    }

    let mut out: Vec<(usize, usize, f64)> = Vec::new();
    if intersection {
        for p in &forward {
            if backward.iter().any(|q| (q.0, q.1) == (p.0, p.1)) {
                out.push(*p);
            }
        }
    } else {
        for p in forward.iter().chain(&backward) {
            if !out.iter().any(|q| (q.0, q.1) == (p.0, p.1)) {
                out.push(*p);
            }
        }
    }
    out.retain(|p| p.2 >= tau && p.2 > 0.0);
    out.sort_by(|a, b| {
        b.2.partial_cmp(&a.2)
            .unwrap()
            .then((a.0, a.1).cmp(&(b.0, b.1)))
    });
    out
}
