//! Closed-form orthogonal alignment of each language onto a reference space.
//!
//! For mined pairs `(x_i, y_i)` the orthogonal `W` minimizing
//! `Σ ‖x_i W − y_i‖²` is `U Vᵀ`, where `U Σ Vᵀ` is the SVD of `Σ x_iᵀ y_i`.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use nalgebra::DMatrix;

use crate::embeddings::EmbeddingMatrix;
use crate::error::{Error, Result};
use crate::miner::MinedSet;

/// Singular-value ratio below which the cross-covariance counts as singular.
const RANK_TOLERANCE: f64 = 1e-9;

/// Per-language orthogonal maps into the reference language's space.
#[derive(Debug, Clone, PartialEq)]
pub struct AlignmentMap {
    pub reference: String,
    pub maps: BTreeMap<String, DMatrix<f64>>,
}

impl AlignmentMap {
    pub fn get(&self, lang: &str) -> Option<&DMatrix<f64>> {
        self.maps.get(lang)
    }

    /// Maps every row of `m` through `lang`'s matrix and renormalizes.
    pub fn apply(&self, lang: &str, m: &EmbeddingMatrix) -> Result<EmbeddingMatrix> {
        let w = self
            .get(lang)
            .ok_or_else(|| Error::invalid(format!("no alignment for language {lang}")))?;
        transform(m, w)
    }
}

/// Row-wise `x · W`, renormalized; ids are kept.
pub fn transform(m: &EmbeddingMatrix, w: &DMatrix<f64>) -> Result<EmbeddingMatrix> {
    let dim = m.dim();
    if w.nrows() != dim || w.ncols() != dim {
        return Err(Error::DimMismatch {
            left: dim,
            right: w.nrows(),
        });
    }
    let mut out = vec![0.0f64; m.as_slice().len()];
    for (row, dst) in m.rows().zip(out.chunks_exact_mut(dim)) {
        for (i, &x) in row.iter().enumerate() {
            let x = f64::from(x);
            for (j, d) in dst.iter_mut().enumerate() {
                *d += x * w[(i, j)];
            }
        }
    }
    EmbeddingMatrix::normalize(dim, &out)?.with_ids(m.ids().to_vec())
}

/// Orthogonal `W` minimizing `Σ ‖x W − y‖²` over row pairs.
///
/// `lang` only labels errors.
pub fn orthogonal_procrustes(
    lang: &str,
    pairs: &[(usize, usize)],
    x: &EmbeddingMatrix,
    y: &EmbeddingMatrix,
) -> Result<DMatrix<f64>> {
    let dim = x.dim();
    if y.dim() != dim {
        return Err(Error::DimMismatch {
            left: dim,
            right: y.dim(),
        });
    }
    let mut cov = DMatrix::<f64>::zeros(dim, dim);
    for &(i, j) in pairs {
        let (xr, yr) = (x.row(i), y.row(j));
        for (a, &xa) in xr.iter().enumerate() {
            let xa = f64::from(xa);
            for (b, &yb) in yr.iter().enumerate() {
                cov[(a, b)] += xa * f64::from(yb);
            }
        }
    }
    let svd = cov.svd(true, true);
    let max = svd.singular_values.max();
    let min = svd.singular_values.min();
    if max.is_nan() || max <= 0.0 || min <= RANK_TOLERANCE * max {
        return Err(Error::RankDeficient {
            lang: lang.to_owned(),
        });
    }
    let u = svd.u.expect("requested U");
    let v_t = svd.v_t.expect("requested Vᵀ");
    Ok(u * v_t)
}

/// Row pairs linking two languages, collected from mined sets in either
/// direction. Keys are `(lang_a, lang_b)`; values pair an `a` row with a
/// `b` row.
fn links(mined: &[MinedSet]) -> BTreeMap<(String, String), BTreeSet<(usize, usize)>> {
    let mut out: BTreeMap<(String, String), BTreeSet<(usize, usize)>> = BTreeMap::new();
    for set in mined {
        for p in &set.pairs {
            let (s, t) = (p.src.index(), p.tgt.index());
            out.entry((set.src_lang.clone(), set.tgt_lang.clone()))
                .or_default()
                .insert((s, t));
            out.entry((set.tgt_lang.clone(), set.src_lang.clone()))
                .or_default()
                .insert((t, s));
        }
    }
    out
}

/// Fits one orthogonal map per language into `reference`'s space.
///
/// Languages with at least `dim` mined pairs against the reference are fit
/// directly. Others are fit against an already aligned language (breadth
/// first from the reference) and composed through it.
pub fn procrustes_train(
    mined: &[MinedSet],
    embeddings: &[(&str, &EmbeddingMatrix)],
    reference: &str,
) -> Result<AlignmentMap> {
    let emb: BTreeMap<&str, &EmbeddingMatrix> = embeddings.iter().copied().collect();
    let ref_emb = emb.get(reference).ok_or_else(|| {
        Error::invalid(format!("reference language {reference} has no embeddings"))
    })?;
    let dim = ref_emb.dim();
    let links = links(mined);

    let mut maps = BTreeMap::new();
    maps.insert(reference.to_owned(), DMatrix::<f64>::identity(dim, dim));
    let mut queue = VecDeque::from([reference.to_owned()]);

    while let Some(anchor) = queue.pop_front() {
        for &(lang, x) in embeddings {
            if maps.contains_key(lang) {
                continue;
            }
            let Some(pairs) = links.get(&(lang.to_owned(), anchor.clone())) else {
                continue;
            };
            if pairs.len() < dim {
                continue;
            }
            let pairs: Vec<(usize, usize)> = pairs.iter().copied().collect();
            let to_anchor = orthogonal_procrustes(lang, &pairs, x, emb[anchor.as_str()])?;
            let composed = to_anchor * &maps[&anchor];
            maps.insert(lang.to_owned(), composed);
            queue.push_back(lang.to_owned());
        }
    }

    if let Some(&(lang, _)) = embeddings.iter().find(|(l, _)| !maps.contains_key(*l)) {
        let found = links
            .get(&(lang.to_owned(), reference.to_owned()))
            .map_or(0, BTreeSet::len);
        return Err(Error::InsufficientPairs {
            lang: lang.to_owned(),
            found,
            needed: dim,
        });
    }

    Ok(AlignmentMap {
        reference: reference.to_owned(),
        maps,
    })
}
