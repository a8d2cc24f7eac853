//! Deterministic character n-gram embedder.
//!
//! Each sentence is padded with boundary markers and split into character
//! bigrams and trigrams. Every n-gram adds 1.0 to a coordinate chosen by a
//! seeded hash; the resulting count vector is normalized. Counts are
//! non-negative so the sum is never zero for a non-empty sentence.

use super::EmbeddingMatrix;
use crate::corpus::Corpus;
use crate::error::{Error, Result};

const BOUNDARY: char = '\u{2}';
const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

fn ngram_hash(seed: u64, ngram: &[char]) -> u64 {
    let mut h = FNV_OFFSET;
    let mut eat = |b: u8| {
        h ^= u64::from(b);
        h = h.wrapping_mul(FNV_PRIME);
    };
    seed.to_le_bytes().into_iter().for_each(&mut eat);
    let mut buf = [0u8; 4];
    for c in ngram {
        c.encode_utf8(&mut buf).bytes().for_each(&mut eat);
        // separator so ("ab","c") and ("a","bc") differ
        eat(0xff);
    }
    // splitmix64 finalizer for better low-bit mixing
    h ^= h >> 30;
    h = h.wrapping_mul(0xbf58_476d_1ce4_e5b9);
    h ^= h >> 27;
    h = h.wrapping_mul(0x94d0_49bb_1331_11eb);
    h ^ (h >> 31)
}

pub(crate) fn embed_text(text: &str, dim: usize, seed: u64, out: &mut [f64]) {
    out.fill(0.0);
    let chars: Vec<char> = std::iter::once(BOUNDARY)
        .chain(text.chars())
        .chain(std::iter::once(BOUNDARY))
        .collect();
    for n in [2usize, 3] {
        for gram in chars.windows(n) {
            let slot = (ngram_hash(seed, gram) % dim as u64) as usize;
            out[slot] += 1.0;
        }
    }
}

/// Embeds every sentence of `corpus`; row ids are the corpus ids.
pub fn toy_embed(corpus: &Corpus, dim: usize, seed: u64) -> Result<EmbeddingMatrix> {
    if dim < 8 {
        return Err(Error::invalid(format!(
            "toy embedder needs dim >= 8, got {dim}"
        )));
    }
    let mut raw = vec![0.0f64; corpus.len() * dim];
    for (text, out) in corpus.sentences().iter().zip(raw.chunks_exact_mut(dim)) {
        embed_text(text, dim, seed, out);
    }
    EmbeddingMatrix::normalize(dim, &raw)?.with_ids(corpus.ids().to_vec())
}
