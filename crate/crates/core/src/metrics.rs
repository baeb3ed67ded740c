//! Evaluation mathematics: FPR at a fixed TPR, AUROC, report assembly.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::detector::calibrate_threshold;
use crate::error::{Error, Result};

/// Scores of the two ground-truth populations of a run.
#[derive(Clone, Debug)]
pub struct ScoredPopulation {
    pub id_scores: Vec<f64>,
    pub ood_scores: Vec<f64>,
}

impl ScoredPopulation {
    pub fn new(id_scores: Vec<f64>, ood_scores: Vec<f64>) -> Result<Self> {
        if id_scores.is_empty() || ood_scores.is_empty() {
            return Err(Error::EmptyScores);
        }
        if let Some(index) = id_scores
            .iter()
            .chain(&ood_scores)
            .position(|s| !s.is_finite())
        {
            return Err(Error::NonFinite { index });
        }
        Ok(Self {
            id_scores,
            ood_scores,
        })
    }
}

/// Fraction of OOD scores at or above the threshold that keeps `tpr_target`
/// of the ID scores accepted — OOD samples wrongly taken for ID.
///
/// The threshold and the >= convention are exactly the detector's, so at
/// target 0.95 this reproduces an unadapted engine's own false-positive count.
pub fn fpr_at_tpr(pop: &ScoredPopulation, tpr_target: f64) -> Result<f64> {
    let threshold = calibrate_threshold(&pop.id_scores, tpr_target)?;
    if pop.ood_scores.is_empty() {
        return Err(Error::EmptyScores);
    }
    let fp = pop.ood_scores.iter().filter(|s| **s >= threshold).count();
    Ok(fp as f64 / pop.ood_scores.len() as f64)
}

/// Probability that a random ID score exceeds a random OOD score, ties
/// counted 1/2 — the normalized Mann-Whitney U statistic, computed exactly
/// from midranks rather than by curve integration.
pub fn auroc(pop: &ScoredPopulation) -> Result<f64> {
    let n_id = pop.id_scores.len();
    let n_ood = pop.ood_scores.len();
    if n_id == 0 || n_ood == 0 {
        return Err(Error::EmptyScores);
    }
    let mut all: Vec<(f64, bool)> = Vec::with_capacity(n_id + n_ood);
    all.extend(pop.id_scores.iter().map(|&s| (s, true)));
    all.extend(pop.ood_scores.iter().map(|&s| (s, false)));
    all.sort_by(|a, b| a.0.total_cmp(&b.0));

    // Sum of ID midranks: tied scores share the average of their 1-based
    // rank range, which keeps tie contributions at exactly 1/2 per pair.
    let mut id_rank_sum = 0.0f64;
    let mut i = 0;
    while i < all.len() {
        let mut j = i + 1;
        while j < all.len() && all[j].0 == all[i].0 {
            j += 1;
        }
        let midrank = (i + 1 + j) as f64 / 2.0;
        for item in &all[i..j] {
            if item.1 {
                id_rank_sum += midrank;
            }
        }
        i = j;
    }
    let u = id_rank_sum - (n_id * (n_id + 1)) as f64 / 2.0;
    Ok(u / (n_id as f64 * n_ood as f64))
}

/// Metrics for one dataset within a protocol run.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetMetrics {
    pub fpr95: f64,
    pub auroc: f64,
}

/// Aggregate results of a protocol run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub fpr95: f64,
    pub auroc: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub id_reeval_accuracy: Option<f64>,
    pub per_dataset: BTreeMap<String, DatasetMetrics>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mean_inference_micros: Option<f64>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn pop(id: &[f64], ood: &[f64]) -> ScoredPopulation {
        ScoredPopulation::new(id.to_vec(), ood.to_vec()).unwrap()
    }

    /// Brute-force pairwise AUROC oracle.
    fn auroc_brute(id: &[f64], ood: &[f64]) -> f64 {
        let mut wins = 0.0;
        for a in id {
            for b in ood {
                if a > b {
                    wins += 1.0;
                } else if a == b {
                    wins += 0.5;
                }
            }
        }
        wins / (id.len() * ood.len()) as f64
    }

    #[test]
    fn fpr_derived_example() {
        // ID = {-1..-20}, OOD = {-1.5, -25}, target 0.95: threshold -19,
        // one of two OOD scores clears it.
        let id: Vec<f64> = (1..=20).map(|i| -(i as f64)).collect();
        let p = pop(&id, &[-1.5, -25.0]);
        assert_eq!(fpr_at_tpr(&p, 0.95).unwrap(), 0.5);
    }

    #[test]
    fn fpr_perfect_separation() {
        let p = pop(&[-0.1, -0.2, -0.3], &[-5.0, -6.0]);
        assert_eq!(fpr_at_tpr(&p, 0.95).unwrap(), 0.0);
    }

    #[test]
    fn fpr_total_overlap_from_above() {
        let p = pop(&[-2.0, -3.0], &[-0.5, -1.0]);
        assert_eq!(fpr_at_tpr(&p, 0.95).unwrap(), 1.0);
    }

    #[test]
    fn auroc_full_separation() {
        assert_eq!(auroc(&pop(&[-0.1, -0.2], &[-0.9, -1.0])).unwrap(), 1.0);
    }

    #[test]
    fn auroc_identical_populations() {
        assert_eq!(auroc(&pop(&[-0.3, -0.7], &[-0.3, -0.7])).unwrap(), 0.5);
    }

    #[test]
    fn auroc_three_of_four_pairs() {
        assert_eq!(auroc(&pop(&[-0.1, -0.5], &[-0.3, -0.7])).unwrap(), 0.75);
    }

    #[test]
    fn empty_scores_rejected() {
        assert!(ScoredPopulation::new(vec![], vec![-1.0]).is_err());
        assert!(ScoredPopulation::new(vec![-1.0], vec![]).is_err());
        assert!(ScoredPopulation::new(vec![f64::NAN], vec![-1.0]).is_err());
    }

    fn arb_scores(max: usize) -> impl Strategy<Value = Vec<f64>> {
        // Quantized so ties actually happen.
        prop::collection::vec((-400i32..0).prop_map(|x| x as f64 / 40.0), 1..max)
    }

    proptest! {
        #[test]
        fn auroc_matches_brute_force(id in arb_scores(60), ood in arb_scores(60)) {
            let p = pop(&id, &ood);
            let fast = auroc(&p).unwrap();
            let slow = auroc_brute(&id, &ood);
            prop_assert!((fast - slow).abs() <= 1e-12);
        }

        #[test]
        fn auroc_complement_is_exact(id in arb_scores(60), ood in arb_scores(60)) {
            let a = auroc(&pop(&id, &ood)).unwrap();
            let b = auroc(&pop(&ood, &id)).unwrap();
            prop_assert_eq!(a + b, 1.0);
        }

        #[test]
        fn fpr_monotone_in_target(id in arb_scores(80), ood in arb_scores(80), t1 in 0.05..0.95f64, dt in 0.0..0.05f64) {
            let p = pop(&id, &ood);
            let low = fpr_at_tpr(&p, t1).unwrap();
            let high = fpr_at_tpr(&p, t1 + dt).unwrap();
            // A lower TPR target frees the threshold to rise, so FPR can
            // only drop or stay.
            prop_assert!(low <= high);
        }

        // Both metrics only look at score order, so any strictly increasing
        // transform leaves them unchanged.
        #[test]
        fn rank_invariance(id in arb_scores(50), ood in arb_scores(50), a in 0.1..5.0f64, b in -3.0..3.0f64) {
            let p = pop(&id, &ood);
            let warp = |s: f64| a * s + b; // affine: strictly increasing, tie-preserving
            let id2: Vec<f64> = id.iter().map(|&s| warp(s)).collect();
            let ood2: Vec<f64> = ood.iter().map(|&s| warp(s)).collect();
            let q = pop(&id2, &ood2);
            prop_assert!((auroc(&p).unwrap() - auroc(&q).unwrap()).abs() <= 1e-12);
            prop_assert_eq!(fpr_at_tpr(&p, 0.95).unwrap(), fpr_at_tpr(&q, 0.95).unwrap());
        }
    }
}
