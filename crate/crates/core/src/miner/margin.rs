use serde::{Deserialize, Serialize};

use crate::embeddings::dot;
use crate::error::{Error, Result};
use crate::index::Neighborhood;

/// Denominators at or below this make a pair unscorable.
pub const MIN_DENOMINATOR: f64 = 1e-9;

/// Neighborhood size used for mining unless configured otherwise.
pub const DEFAULT_K: usize = 5;
/// Default minimum margin score; the middle of the 1.04–1.07 range that works
/// in practice.
pub const DEFAULT_TAU: f64 = 1.06;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CandidateRule {
    /// Keep a pair if either side picks it as its best margin partner.
    #[default]
    Union,
    /// Keep a pair only if both sides pick each other.
    Intersection,
}

impl std::str::FromStr for CandidateRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "union" => Ok(CandidateRule::Union),
            "intersection" => Ok(CandidateRule::Intersection),
            other => Err(Error::invalid(format!("unknown candidate rule {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MarginConfig {
    pub k: usize,
    pub tau: f64,
    pub max_pairs: Option<usize>,
    pub candidate_rule: CandidateRule,
}

impl Default for MarginConfig {
    fn default() -> Self {
        MarginConfig {
            k: DEFAULT_K,
            tau: DEFAULT_TAU,
            max_pairs: None,
            candidate_rule: CandidateRule::Union,
        }
    }
}

impl MarginConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::invalid("margin k must be at least 1"));
        }
        if !(self.tau > 0.0 && self.tau.is_finite()) {
            return Err(Error::invalid(format!(
                "margin tau must be positive and finite, got {}",
                self.tau
            )));
        }
        if self.max_pairs == Some(0) {
            return Err(Error::invalid("max_pairs must be at least 1 when set"));
        }
        Ok(())
    }
}

/// Ratio margin from precomputed parts: `cos / (Σ_Nx cos / 2k + Σ_Ny cos / 2k)`.
///
/// `k` is the configured neighborhood size; shorter (clamped) neighborhoods
/// contribute nothing for their missing entries.
#[inline]
pub fn margin_from_parts(cos: f64, nx_sum: f64, ny_sum: f64, k: usize) -> Option<f64> {
    let two_k = 2.0 * k as f64;
    let denom = nx_sum / two_k + ny_sum / two_k;
    if denom <= MIN_DENOMINATOR {
        return None;
    }
    let score = cos / denom;
    score.is_finite().then_some(score)
}

/// Margin score of `(x, y)` given `x`'s neighborhood in `y`'s language and
/// `y`'s neighborhood in `x`'s language. `None` when the denominator is not
/// positive.
pub fn margin_score(
    x: &[f32],
    y: &[f32],
    nx: &Neighborhood,
    ny: &Neighborhood,
    k: usize,
) -> Option<f64> {
    margin_from_parts(dot(x, y), nx.cos_sum(), ny.cos_sum(), k)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::SentenceId;
    use crate::index::Hit;

    fn hood(cos: &[f64]) -> Neighborhood {
        Neighborhood {
            query: SentenceId(0),
            neighbors: cos
                .iter()
                .enumerate()
                .map(|(i, &c)| Hit::new(i, c))
                .collect(),
        }
    }

    #[test]
    fn two_d_fixture() {
        // x = (0.6, 0.8); targets y1 = (1,0), y2 = (0,1); k = 1.
        // N_x = {y2} with cos 0.8; N_y1 among sources {x, x2 = (1,0)} = {x2} with cos 1.0.
        let x = [0.6f32, 0.8];
        let y1 = [1.0f32, 0.0];
        let s = margin_score(&x, &y1, &hood(&[0.8]), &hood(&[1.0]), 1).unwrap();
        let expected = 0.6 / (0.8 / 2.0 + 1.0 / 2.0);
        assert!((s - expected).abs() < 1e-6);
        assert!((s - 0.6667).abs() < 1e-4);
    }

    #[test]
    fn uniform_geometry_cancels() {
        let s = 0.37;
        let k = 5;
        let score = margin_from_parts(s, s * k as f64, s * k as f64, k).unwrap();
        assert!((score - 1.0).abs() < 1e-15);
    }

    #[test]
    fn clamped_neighborhoods_keep_divisor() {
        // one neighbor each, k = 4: denominator = 0.5/8 + 0.5/8
        let s = margin_from_parts(0.5, 0.5, 0.5, 4).unwrap();
        assert!((s - 4.0).abs() < 1e-12);
    }

    #[test]
    fn non_positive_denominator_unscorable() {
        assert_eq!(margin_from_parts(0.5, 0.0, 0.0, 5), None);
        assert_eq!(margin_from_parts(0.5, -1.0, 0.5, 5), None);
        assert_eq!(margin_from_parts(0.5, 1e-10, 0.0, 1), None);
    }

    #[test]
    fn swap_symmetry() {
        let nx = hood(&[0.9, 0.7, 0.3]);
        let ny = hood(&[0.8, 0.4]);
        let x = [0.6f32, 0.8];
        let y = [0.8f32, 0.6];
        assert_eq!(
            margin_score(&x, &y, &nx, &ny, 3),
            margin_score(&y, &x, &ny, &nx, 3)
        );
    }

    #[test]
    fn defaults_and_validation() {
        let cfg = MarginConfig::default();
        assert_eq!(cfg.k, 5);
        assert_eq!(cfg.tau, 1.06);
        cfg.validate().unwrap();
        assert!(MarginConfig { k: 0, ..cfg }.validate().is_err());
        assert!(MarginConfig { tau: 0.0, ..cfg }.validate().is_err());
        assert!(MarginConfig {
            max_pairs: Some(0),
            ..cfg
        }
        .validate()
        .is_err());
    }
}
