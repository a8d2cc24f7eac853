//! Unit-normalized sentence embedding matrices.
//!
//! Every [`EmbeddingMatrix`] holds rows of unit L2 norm, so cosine similarity
//! is a plain dot product everywhere downstream. Values are stored in single
//! precision; dot products accumulate in double precision.

mod io;
mod synth;
mod toy;

pub use io::{ids_path, read_matrix, write_matrix, MAGIC, VERSION};
pub use synth::{expm, synth_world, SyntheticWorld, PRESET_MISALIGNMENT};
pub use toy::toy_embed;

use std::collections::HashMap;

use crate::corpus::Corpus;
use crate::error::{Error, Result};

/// Allowed deviation of a stored row norm from 1.0.
pub const UNIT_NORM_TOLERANCE: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingMatrix {
    dim: usize,
    data: Vec<f32>,
    ids: Vec<String>,
}

impl EmbeddingMatrix {
    /// Scales each row of a row-major `n × dim` matrix to unit L2 norm.
    pub fn normalize<T: Copy + Into<f64>>(dim: usize, rows: &[T]) -> Result<Self> {
        check_shape(dim, rows.len())?;
        let mut data = Vec::with_capacity(rows.len());
        for (r, row) in rows.chunks_exact(dim).enumerate() {
            let mut sq = 0.0f64;
            for (c, &v) in row.iter().enumerate() {
                let v: f64 = v.into();
                if !v.is_finite() {
                    return Err(Error::NonFinite { row: r, col: c });
                }
                sq += v * v;
            }
            if sq == 0.0 {
                return Err(Error::DegenerateVector { row: r });
            }
            let norm = sq.sqrt();
            data.extend(row.iter().map(|&v| (v.into() / norm) as f32));
        }
        Ok(Self::with_default_ids(dim, data))
    }

    /// Wraps rows that are already unit norm, validating the invariant.
    pub fn from_unit_rows(dim: usize, data: Vec<f32>) -> Result<Self> {
        check_shape(dim, data.len())?;
        let m = Self::with_default_ids(dim, data);
        m.validate()?;
        Ok(m)
    }

    fn with_default_ids(dim: usize, data: Vec<f32>) -> Self {
        let n = data.len() / dim;
        EmbeddingMatrix {
            dim,
            data,
            ids: (0..n).map(|i| i.to_string()).collect(),
        }
    }

    /// Replaces the external row ids.
    pub fn with_ids(mut self, ids: Vec<String>) -> Result<Self> {
        if ids.len() != self.len() {
            return Err(Error::invalid(format!(
                "{} ids for {} embedding rows",
                ids.len(),
                self.len()
            )));
        }
        self.ids = ids;
        Ok(self)
    }

    /// Checks finiteness and the unit-norm invariant on every row.
    pub fn validate(&self) -> Result<()> {
        for (r, row) in self.data.chunks_exact(self.dim).enumerate() {
            let mut sq = 0.0f64;
            for (c, &v) in row.iter().enumerate() {
                if !v.is_finite() {
                    return Err(Error::NonFinite { row: r, col: c });
                }
                sq += f64::from(v) * f64::from(v);
            }
            let norm = sq.sqrt();
            if (norm - 1.0).abs() > UNIT_NORM_TOLERANCE {
                return Err(Error::NotUnitNorm { row: r, norm });
            }
        }
        Ok(())
    }

    /// Checks that this matrix lines up row-for-row with `corpus`.
    pub fn check_bound_to(&self, corpus: &Corpus) -> Result<()> {
        if self.len() != corpus.len() {
            return Err(Error::invalid(format!(
                "corpus {} has {} sentences but embeddings have {} rows",
                corpus.lang(),
                corpus.len(),
                self.len()
            )));
        }
        if let Some(r) = (0..self.len()).find(|&r| self.ids[r] != corpus.ids()[r]) {
            return Err(Error::invalid(format!(
                "corpus {}: row {r} id {:?} does not match embedding id {:?}",
                corpus.lang(),
                corpus.ids()[r],
                self.ids[r]
            )));
        }
        Ok(())
    }

    /// Rows with the given external ids, in the order given.
    pub fn select_ids(&self, ids: &[String]) -> Result<Self> {
        let index: HashMap<&str, usize> = self
            .ids
            .iter()
            .enumerate()
            .map(|(r, id)| (id.as_str(), r))
            .collect();
        let mut data = Vec::with_capacity(ids.len() * self.dim);
        for id in ids {
            let r = *index
                .get(id.as_str())
                .ok_or_else(|| Error::invalid(format!("no embedding row with id {id:?}")))?;
            data.extend_from_slice(self.row(r));
        }
        Ok(EmbeddingMatrix {
            dim: self.dim,
            data,
            ids: ids.to_vec(),
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> std::slice::ChunksExact<'_, f32> {
        self.data.chunks_exact(self.dim)
    }

    pub fn as_slice(&self) -> &[f32] {
        &self.data
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }
}

fn check_shape(dim: usize, len: usize) -> Result<()> {
    if dim == 0 {
        return Err(Error::invalid("embedding dim must be positive"));
    }
    if !len.is_multiple_of(dim) {
        return Err(Error::invalid(format!(
            "{len} values do not form rows of dim {dim}"
        )));
    }
    Ok(())
}

/// Dot product accumulated in double precision.
///
/// Eight lanes with a fixed reduction order, so the result is the same on
/// every call and `dot(a, b) == dot(b, a)` bit for bit. Every similarity in
/// the crate goes through this function.
#[inline]
pub fn dot(a: &[f32], b: &[f32]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let ca = a.chunks_exact(8);
    let cb = b.chunks_exact(8);
    let mut tail = 0.0f64;
    for (&x, &y) in ca.remainder().iter().zip(cb.remainder()) {
        tail += f64::from(x) * f64::from(y);
    }
    let mut acc = [0.0f64; 8];
    for (x, y) in ca.zip(cb) {
        for i in 0..8 {
            acc[i] += f64::from(x[i]) * f64::from(y[i]);
        }
    }
    ((acc[0] + acc[4]) + (acc[1] + acc[5])) + ((acc[2] + acc[6]) + (acc[3] + acc[7])) + tail
}
