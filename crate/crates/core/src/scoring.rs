//! Turning a neighbor list into a scalar OOD score.
//!
//! The standard score is the negative average scaled distance to the k
//! nearest memory entries; higher means more ID-like and it is never
//! positive. Two alternative combinators (k-th and k-median) reuse the same
//! neighbor list, and a log-likelihood-ratio variant is available when
//! neighbors carry distribution labels.

use serde::{Deserialize, Serialize};

use crate::bank::Neighbor;
use crate::error::{Error, Result};

/// How the k scaled neighbor distances collapse into one score.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Combinator {
    /// Mean of `-dist_i * scale_i` over all provided neighbors.
    KAvg,
    /// `-dist * scale` of the k-th (largest-distance) neighbor.
    KTh,
    /// `-dist * scale` of the neighbor at 1-based index `max(1, floor(k/2))`.
    KMedian,
}

/// Which score function to run.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScoreVariant {
    Standard,
    LogRatio,
}

/// Scoring parameters: neighbor count, combinator, variant.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScoreConfig {
    pub k: usize,
    pub combinator: Combinator,
    pub variant: ScoreVariant,
}

impl ScoreConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::InvalidK);
        }
        Ok(())
    }
}

/// Distribution side of a sample or neighbor.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DistributionLabel {
    Id,
    Ood,
}

/// A neighbor paired with an (optional) distribution label for the
/// log-ratio variant.
#[derive(Clone, Copy, Debug)]
pub struct LabeledNeighbor {
    pub dist: f64,
    pub scale: f64,
    pub label: Option<DistributionLabel>,
}

/// Standard weighted score over a non-empty ascending neighbor list.
///
/// With k = number of neighbors provided (tiny banks yield fewer than the
/// configured k; the average then runs over the actual count):
/// - `KAvg`:    (1/k) * sum_i -dist_i * scale_i
/// - `KTh`:     -dist_k * scale_k
/// - `KMedian`: -dist_m * scale_m at m = max(1, floor(k/2)), 1-based.
pub fn score(neighbors: &[Neighbor], combinator: Combinator) -> Result<f64> {
    if neighbors.is_empty() {
        return Err(Error::EmptyNeighbors);
    }
    debug_assert!(
        neighbors.windows(2).all(|w| w[0].dist <= w[1].dist),
        "neighbors must be sorted ascending by distance"
    );
    let k = neighbors.len();
    let value = match combinator {
        Combinator::KAvg => {
            neighbors.iter().map(|n| -n.dist * n.scale).sum::<f64>() / k as f64
        }
        Combinator::KTh => {
            let last = &neighbors[k - 1];
            -last.dist * last.scale
        }
        Combinator::KMedian => {
            let m = (k / 2).max(1);
            let mid = &neighbors[m - 1];
            -mid.dist * mid.scale
        }
    };
    Ok(value)
}

/// Log-likelihood-ratio score over labeled neighbors.
///
/// OOD-labeled neighbors contribute `+dist * scale`, ID-labeled contribute
/// `-dist * scale`, both averaged by the neighbor count. With no OOD-labeled
/// neighbors this equals the standard `KAvg` score exactly, which is also
/// its weakness early in a stream: until OOD entries accumulate the ratio
/// has nothing to compare against, and mislabeled neighbors bias it. It is
/// shipped as an experimental scorer, not wired into the decision loop.
pub fn log_ratio_score(neighbors: &[LabeledNeighbor]) -> Result<f64> {
    if neighbors.is_empty() {
        return Err(Error::EmptyNeighbors);
    }
    let k = neighbors.len() as f64;
    let mut total = 0.0;
    for (index, n) in neighbors.iter().enumerate() {
        let label = n.label.ok_or(Error::MissingLabel { index })?;
        let term = n.dist * n.scale;
        total += match label {
            DistributionLabel::Ood => term,
            DistributionLabel::Id => -term,
        };
    }
    Ok(total / k)
}
