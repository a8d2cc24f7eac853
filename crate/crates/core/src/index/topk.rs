use std::cmp::Ordering;
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};

use crate::corpus::SentenceId;

/// One retrieved row and its cosine to the query.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Hit {
    pub ordinal: SentenceId,
    pub cos: f64,
}

impl Hit {
    pub fn new(ordinal: usize, cos: f64) -> Self {
        Hit {
            ordinal: SentenceId::from(ordinal),
            cos,
        }
    }
}

/// Rank order: higher cosine first, then lower ordinal. `Less` means better.
pub fn rank_cmp(a: &Hit, b: &Hit) -> Ordering {
    b.cos
        .total_cmp(&a.cos)
        .then_with(|| a.ordinal.cmp(&b.ordinal))
}

#[derive(Debug, Clone, Copy)]
struct Ranked(Hit);

impl PartialEq for Ranked {
    fn eq(&self, other: &Self) -> bool {
        rank_cmp(&self.0, &other.0) == Ordering::Equal
    }
}
impl Eq for Ranked {}
impl PartialOrd for Ranked {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Ranked {
    fn cmp(&self, other: &Self) -> Ordering {
        rank_cmp(&self.0, &other.0)
    }
}

/// Bounded max-heap keeping the `k` best hits; the heap top is the worst kept.
#[derive(Debug, Clone)]
pub struct TopK {
    k: usize,
    heap: BinaryHeap<Ranked>,
}

impl TopK {
    pub fn new(k: usize) -> Self {
        TopK {
            k,
            heap: BinaryHeap::with_capacity(k + 1),
        }
    }

    #[inline]
    pub fn push(&mut self, hit: Hit) {
        if self.k == 0 {
            return;
        }
        if self.heap.len() < self.k {
            self.heap.push(Ranked(hit));
        } else if let Some(mut worst) = self.heap.peek_mut() {
            if rank_cmp(&hit, &worst.0) == Ordering::Less {
                *worst = Ranked(hit);
            }
        }
    }

    pub fn extend(&mut self, hits: impl IntoIterator<Item = Hit>) {
        hits.into_iter().for_each(|h| self.push(h));
    }

    /// Best first.
    pub fn into_sorted(self) -> Vec<Hit> {
        self.heap
            .into_sorted_vec()
            .into_iter()
            .map(|r| r.0)
            .collect()
    }
}
