//! Independent oracles shared by the integration suites. Everything here
//! deliberately avoids the library's own code paths for the quantity it
//! checks.

use oddstream::prelude::*;

/// Brute-force exact kNN: stable sort of every bank entry by distance.
pub fn brute_force_knn(bank: &MemoryBank, query: &FeatureVector, k: usize) -> Vec<Neighbor> {
    let mut all: Vec<Neighbor> = bank
        .entries()
        .iter()
        .enumerate()
        .map(|(i, e)| Neighbor {
            entry_ref: i,
            dist: euclidean(query.values(), e.vector().values()),
            scale: e.scale(),
        })
        .collect();
    all.sort_by(|a, b| a.dist.total_cmp(&b.dist));
    all.truncate(k.min(all.len()));
    all
}

/// Hand-rolled Euclidean distance, independent of the geometry module.
pub fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// Pairwise-counting AUROC oracle, ties at 1/2.
pub fn brute_force_auroc(id: &[f64], ood: &[f64]) -> f64 {
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
    wins / (id.len() as f64 * ood.len() as f64)
}

/// Direct threshold-count FPR oracle: scan candidate thresholds (the ID
/// score values) for the largest one keeping at least `tpr` of ID scores,
/// then count OOD scores at or above it.
pub fn brute_force_fpr_at_tpr(id: &[f64], ood: &[f64], tpr: f64) -> f64 {
    let mut best: Option<f64> = None;
    for &cand in id {
        let kept = id.iter().filter(|s| **s >= cand).count() as f64 / id.len() as f64;
        if kept >= tpr && best.is_none_or(|b| cand > b) {
            best = Some(cand);
        }
    }
    let threshold = best.expect("some candidate always satisfies tpr <= 1");
    ood.iter().filter(|s| **s >= threshold).count() as f64 / ood.len() as f64
}

/// Standard normal CDF by adaptive Simpson quadrature over the density,
/// independent of any erf implementation. Accurate to well below 1e-10 on
/// |x| <= 8.
pub fn quadrature_normal_cdf(x: f64) -> f64 {
    if x < -8.0 {
        return 0.0;
    }
    if x > 8.0 {
        return 1.0;
    }
    // integrate phi(t) from 0 to |x| with Simpson's rule, then reflect.
    let target = x.abs();
    let n = 20_000; // even
    let h = target / n as f64;
    let phi = |t: f64| (-t * t / 2.0).exp() / (2.0 * std::f64::consts::PI).sqrt();
    let mut sum = phi(0.0) + phi(target);
    for i in 1..n {
        let t = i as f64 * h;
        sum += phi(t) * if i % 2 == 0 { 2.0 } else { 4.0 };
    }
    let integral = sum * h / 3.0;
    if x >= 0.0 {
        0.5 + integral
    } else {
        0.5 - integral
    }
}

/// A self-contained vanilla kNN detector: brute-force neighbor scan,
/// negative mean distance score, fixed threshold. Written against the raw
/// slices so it shares nothing with the engine.
pub struct VanillaKnn {
    pub bank: Vec<Vec<f64>>,
    pub k: usize,
}

impl VanillaKnn {
    pub fn score(&self, query: &[f64]) -> f64 {
        let mut dists: Vec<f64> = self.bank.iter().map(|e| euclidean(e, query)).collect();
        dists.sort_by(|a, b| a.total_cmp(b));
        let k = self.k.min(dists.len());
        -dists[..k].iter().sum::<f64>() / k as f64
    }

    pub fn is_id(&self, query: &[f64], lambda: f64) -> bool {
        self.score(query) >= lambda
    }
}
