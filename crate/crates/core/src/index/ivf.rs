//! Inverted-file approximate search backed by spherical k-means.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::flat::{check_dims, clamp_k};
use super::topk::{Hit, TopK};
use super::Neighborhood;
use crate::corpus::SentenceId;
use crate::embeddings::{dot, EmbeddingMatrix};
use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct IvfIndex<'a> {
    target: &'a EmbeddingMatrix,
    centroids: EmbeddingMatrix,
    lists: Vec<Vec<u32>>,
}

impl<'a> IvfIndex<'a> {
    pub fn centroids(&self) -> &EmbeddingMatrix {
        &self.centroids
    }

    /// Row ordinals per centroid, ascending.
    pub fn lists(&self) -> &[Vec<u32>] {
        &self.lists
    }

    pub fn target(&self) -> &'a EmbeddingMatrix {
        self.target
    }

    /// Exact search restricted to the rows of the `nprobe` closest lists.
    pub fn search(
        &self,
        queries: &EmbeddingMatrix,
        k: usize,
        nprobe: usize,
    ) -> Result<Vec<Neighborhood>> {
        check_dims(self.target.dim(), queries.dim())?;
        let c = self.centroids.len();
        if nprobe == 0 || nprobe > c {
            return Err(Error::invalid(format!(
                "nprobe must be in 1..={c}, got {nprobe}"
            )));
        }
        let k = clamp_k(k, self.target.len());
        let out = (0..queries.len())
            .into_par_iter()
            .map(|q| {
                let query = queries.row(q);
                let mut probes = TopK::new(nprobe);
                for (ci, centroid) in self.centroids.rows().enumerate() {
                    probes.push(Hit::new(ci, dot(query, centroid)));
                }
                let mut top = TopK::new(k);
                for probe in probes.into_sorted() {
                    for &r in &self.lists[probe.ordinal.index()] {
                        let r = r as usize;
                        top.push(Hit::new(r, dot(query, self.target.row(r))));
                    }
                }
                Neighborhood {
                    query: SentenceId::from(q),
                    neighbors: top.into_sorted(),
                }
            })
            .collect();
        Ok(out)
    }
}

/// Index of the most similar centroid; ties go to the lower index.
fn nearest(row: &[f32], centroids: &[Vec<f64>]) -> (usize, f64) {
    let mut best = (0, f64::NEG_INFINITY);
    for (ci, c) in centroids.iter().enumerate() {
        let s: f64 = row
            .iter()
            .zip(c)
            .fold(0.0, |acc, (&x, &y)| acc + f64::from(x) * y);
        if s > best.1 {
            best = (ci, s);
        }
    }
    best
}

fn unit(v: &mut [f64]) -> bool {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if n > 1e-12 {
        v.iter_mut().for_each(|x| *x /= n);
        true
    } else {
        false
    }
}

/// k-means++ seeding under cosine distance: each further centroid is a row
/// drawn with probability proportional to its squared distance from the
/// nearest centroid chosen so far.
fn seed_centroids(target: &EmbeddingMatrix, c: usize, seed: u64) -> Vec<Vec<f64>> {
    let n = target.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut chosen = vec![rng.random_range(0..n)];
    let mut dist: Vec<f64> = vec![f64::INFINITY; n];
    while chosen.len() < c {
        let last = target.row(*chosen.last().expect("non-empty"));
        dist.par_iter_mut().enumerate().for_each(|(r, d)| {
            let gap = (1.0 - dot(target.row(r), last)).max(0.0);
            *d = d.min(gap * gap);
        });
        for &r in &chosen {
            dist[r] = 0.0;
        }
        let total: f64 = dist.iter().sum();
        let next = if total > 0.0 {
            let mut x = rng.random::<f64>() * total;
            let mut pick = None;
            for (r, &d) in dist.iter().enumerate() {
                if d > 0.0 {
                    pick = Some(r);
                    if x < d {
                        break;
                    }
                    x -= d;
                }
            }
            pick.expect("positive total has a positive entry")
        } else {
            // Every remaining row coincides with a centroid.
            (0..n).find(|r| !chosen.contains(r)).expect("c <= n")
        };
        chosen.push(next);
    }
    chosen
        .into_iter()
        .map(|r| target.row(r).iter().map(|&v| f64::from(v)).collect())
        .collect()
}

/// Builds an IVF index with `c` lists using spherical k-means: k-means++
/// seeding, cosine assignment, mean-then-normalize update. Empty clusters are reseeded from
/// the rows farthest from their assigned centroid.
pub fn build_ivf(
    target: &EmbeddingMatrix,
    c: usize,
    iters: usize,
    seed: u64,
) -> Result<IvfIndex<'_>> {
    let n = target.len();
    if c == 0 || c > n {
        return Err(Error::invalid(format!(
            "centroid count must be in 1..={n}, got {c}"
        )));
    }
    let dim = target.dim();
    let mut centroids = seed_centroids(target, c, seed);

    let assign = |centroids: &[Vec<f64>]| -> Vec<(usize, f64)> {
        (0..n)
            .into_par_iter()
            .map(|r| nearest(target.row(r), centroids))
            .collect()
    };

    let mut assignment = assign(&centroids);
    for _ in 0..iters {
        let mut sums = vec![vec![0.0f64; dim]; c];
        let mut counts = vec![0usize; c];
        for (r, &(ci, _)) in assignment.iter().enumerate() {
            counts[ci] += 1;
            for (s, &v) in sums[ci].iter_mut().zip(target.row(r)) {
                *s += f64::from(v);
            }
        }

        // Farthest rows first, by similarity to their own centroid.
        let mut far: Vec<usize> = (0..n).collect();
        far.sort_by(|&a, &b| assignment[a].1.total_cmp(&assignment[b].1).then(a.cmp(&b)));
        let mut far = far.into_iter();

        for (ci, sum) in sums.iter_mut().enumerate() {
            if counts[ci] == 0 || !unit(sum) {
                let r = far.next().expect("c <= n leaves a row to reseed from");
                *sum = target.row(r).iter().map(|&v| f64::from(v)).collect();
            }
        }
        centroids = sums;

        let next = assign(&centroids);
        let stable = next.iter().zip(&assignment).all(|(a, b)| a.0 == b.0);
        assignment = next;
        if stable {
            break;
        }
    }

    let mut lists = vec![Vec::new(); c];
    for (r, &(ci, _)) in assignment.iter().enumerate() {
        lists[ci].push(r as u32);
    }
    let flat: Vec<f64> = centroids.into_iter().flatten().collect();
    Ok(IvfIndex {
        target,
        centroids: EmbeddingMatrix::normalize(dim, &flat)?,
        lists,
    })
}

pub fn search_ivf(
    index: &IvfIndex<'_>,
    queries: &EmbeddingMatrix,
    k: usize,
    nprobe: usize,
) -> Result<Vec<Neighborhood>> {
    index.search(queries, k, nprobe)
}
