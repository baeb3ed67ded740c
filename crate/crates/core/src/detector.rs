//! The streaming detection engine: threshold calibration, per-sample
//! decisions, and margin-gated memory augmentation.
//!
//! A sample is accepted as ID iff its score clears the threshold lambda,
//! which is calibrated so that a target fraction (default 95%) of ID
//! validation scores pass. When adaptation is enabled, samples scoring
//! below `lambda * gamma` are inserted into the bank as OOD with scale
//! kappa, samples scoring above `lambda / gamma` are inserted as ID with
//! scale 1, and everything in between is left out as unreliable. A sample
//! never influences its own decision: the order is decide, then augment,
//! then advance to the next sample.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::bank::{MemoryBank, Neighbor, Provenance};
use crate::error::{Error, Result};
use crate::geometry::FeatureVector;
use crate::scoring::{self, Combinator, DistributionLabel, LabeledNeighbor};

/// Default calibration target: fraction of ID validation scores at or above
/// the threshold.
pub const DEFAULT_TPR_TARGET: f64 = 0.95;

/// The OOD selection margin gamma.
///
/// `Infinite` is an explicit "never augment" sentinel, kept out of the gate
/// arithmetic entirely rather than encoded as a float infinity.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Margin {
    Finite(f64),
    Infinite,
}

impl Margin {
    pub fn validate(&self) -> Result<()> {
        if let Margin::Finite(g) = self {
            if !g.is_finite() || *g < 1.0 {
                return Err(Error::InvalidConfig {
                    reason: format!("gamma must be >= 1 (or \"inf\"), got {g}"),
                });
            }
        }
        Ok(())
    }
}

impl Serialize for Margin {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Margin::Finite(g) => s.serialize_f64(*g),
            Margin::Infinite => s.serialize_str("inf"),
        }
    }
}

impl<'de> Deserialize<'de> for Margin {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let v = serde_json::Value::deserialize(d)?;
        match v {
            serde_json::Value::Number(n) => {
                let g = n
                    .as_f64()
                    .ok_or_else(|| D::Error::custom("gamma is not a number"))?;
                Ok(Margin::Finite(g))
            }
            serde_json::Value::String(s) if s == "inf" => Ok(Margin::Infinite),
            other => Err(D::Error::custom(format!(
                "gamma must be a number or \"inf\", got {other}"
            ))),
        }
    }
}

/// Engine parameters: the tuple (k, lambda, gamma, kappa, combinator,
/// normalize, adapt).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DetectorConfig {
    /// Neighbors per query.
    pub k: usize,
    /// Decision threshold; ID iff score >= lambda. Must be <= 0.
    pub lambda: f64,
    /// Selection margin widening the dead zone around lambda.
    pub gamma: Margin,
    /// Scale attached to augmented-OOD entries.
    pub kappa: f64,
    pub combinator: Combinator,
    /// Project features onto the unit sphere before storing/querying.
    pub normalize: bool,
    /// Enable online memory augmentation.
    pub adapt: bool,
}

impl DetectorConfig {
    /// Preset for banks around the 50k-entry scale: k=50, gamma=1.5, kappa=5.
    pub fn cifar_scale(lambda: f64) -> Self {
        Self {
            k: 50,
            lambda,
            gamma: Margin::Finite(1.5),
            kappa: 5.0,
            combinator: Combinator::KAvg,
            normalize: true,
            adapt: true,
        }
    }

    /// Preset for banks around the 1M-entry scale: k=1000, gamma=1.0, kappa=10.
    pub fn imagenet_scale(lambda: f64) -> Self {
        Self {
            k: 1000,
            lambda,
            gamma: Margin::Finite(1.0),
            kappa: 10.0,
            combinator: Combinator::KAvg,
            normalize: true,
            adapt: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::InvalidK);
        }
        if !self.lambda.is_finite() || self.lambda > 0.0 {
            return Err(Error::InvalidConfig {
                reason: format!("lambda must be finite and <= 0, got {}", self.lambda),
            });
        }
        self.gamma.validate()?;
        if !self.kappa.is_finite() || self.kappa < 1.0 {
            return Err(Error::InvalidConfig {
                reason: format!("kappa must be finite and >= 1, got {}", self.kappa),
            });
        }
        if self.lambda == 0.0 && self.adapt {
            // Degenerate but allowed: the gates collapse to score < 0 /
            // score > 0, so only exact bank duplicates augment as ID.
            log::warn!(
                "lambda = 0 with adaptation enabled: augmentation gates collapse to score < 0 / score > 0"
            );
        }
        Ok(())
    }
}

/// ID/OOD verdict for one sample.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Id,
    Ood,
}

/// Memory action taken after a decision.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Augmentation {
    None,
    AsId,
    AsOod,
}

/// Per-sample output of the engine.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecisionRecord {
    #[serde(rename = "index")]
    pub sample_index: u64,
    pub score: f64,
    pub verdict: Verdict,
    pub augmentation: Augmentation,
    pub bank_size_before: usize,
}

/// Timing captured around the decide step of a stream.
#[derive(Clone, Copy, Debug, Default)]
pub struct StreamStats {
    pub mean_decide_micros: f64,
}

/// Picks the threshold from ID validation scores.
///
/// Returns the largest score value v such that at least `tpr_target` of the
/// scores are >= v; for distinct scores the achieved fraction then lies in
/// `[tpr_target, tpr_target + 1/n)`.
pub fn calibrate_threshold(id_val_scores: &[f64], tpr_target: f64) -> Result<f64> {
    if id_val_scores.is_empty() {
        return Err(Error::EmptyScores);
    }
    if !tpr_target.is_finite() || tpr_target <= 0.0 || tpr_target > 1.0 {
        return Err(Error::InvalidTarget { target: tpr_target });
    }
    let mut sorted = id_val_scores.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let n = sorted.len();
    // Smallest m with m/n >= target. The epsilon guards the case where
    // target*n is an exact integer but rounds up in floating point.
    let m = (tpr_target * n as f64 - 1e-9).ceil() as usize;
    let m = m.clamp(1, n);
    Ok(sorted[m - 1])
}

/// The adaptive OOD detection engine: a memory bank plus its configuration.
#[derive(Clone, Debug)]
pub struct Engine {
    bank: MemoryBank,
    config: DetectorConfig,
}

impl Engine {
    /// Wraps a bank with a validated configuration. The bank must have been
    /// built with the same `normalize` setting the config declares.
    pub fn new(bank: MemoryBank, config: DetectorConfig) -> Result<Self> {
        config.validate()?;
        if bank.is_normalized() != config.normalize {
            return Err(Error::InvalidConfig {
                reason: format!(
                    "bank normalization ({}) does not match config ({})",
                    bank.is_normalized(),
                    config.normalize
                ),
            });
        }
        Ok(Self { bank, config })
    }

    pub fn bank(&self) -> &MemoryBank {
        &self.bank
    }

    pub fn config(&self) -> &DetectorConfig {
        &self.config
    }

    pub fn set_lambda(&mut self, lambda: f64) -> Result<()> {
        let mut updated = self.config;
        updated.lambda = lambda;
        updated.validate()?;
        self.config = updated;
        Ok(())
    }

    pub fn set_adapt(&mut self, adapt: bool) -> Result<()> {
        let mut updated = self.config;
        updated.adapt = adapt;
        updated.validate()?;
        self.config = updated;
        Ok(())
    }

    fn prepared(&self, x: &FeatureVector) -> Result<FeatureVector> {
        if self.config.normalize {
            x.normalized()
        } else {
            Ok(x.clone())
        }
    }

    /// Score a sample against the current bank without mutating anything.
    pub fn score_sample(&self, x: &FeatureVector) -> Result<f64> {
        let z = self.prepared(x)?;
        let neighbors = self.bank.knn_query(&z, self.config.k)?;
        scoring::score(&neighbors, self.config.combinator)
    }

    /// Neighbors of a sample under the engine's normalization setting.
    pub fn neighbors(&self, x: &FeatureVector) -> Result<Vec<Neighbor>> {
        let z = self.prepared(x)?;
        self.bank.knn_query(&z, self.config.k)
    }

    /// Scores a read-only batch in parallel; output order matches input.
    pub fn batch_scores(&self, samples: &[FeatureVector]) -> Result<Vec<f64>> {
        use rayon::prelude::*;
        samples.par_iter().map(|x| self.score_sample(x)).collect()
    }

    /// Scores ID validation samples against the current bank and installs
    /// the calibrated threshold. Returns lambda.
    pub fn calibrate(&mut self, id_val: &[FeatureVector], tpr_target: f64) -> Result<f64> {
        if id_val.is_empty() {
            return Err(Error::EmptyInput);
        }
        let scores = self.batch_scores(id_val)?;
        let lambda = calibrate_threshold(&scores, tpr_target)?;
        self.set_lambda(lambda)?;
        Ok(lambda)
    }

    /// One read-only decision: normalize, query k neighbors, score, compare
    /// against lambda. Never mutates the bank. `sample_index` is 0 here and
    /// filled in by [`Engine::process_stream`].
    pub fn decide(&self, x: &FeatureVector) -> Result<DecisionRecord> {
        let score = self.score_sample(x)?;
        Ok(DecisionRecord {
            sample_index: 0,
            score,
            verdict: self.verdict_for(score),
            augmentation: Augmentation::None,
            bank_size_before: self.bank.len(),
        })
    }

    fn verdict_for(&self, score: f64) -> Verdict {
        if score >= self.config.lambda {
            Verdict::Id
        } else {
            Verdict::Ood
        }
    }

    /// Applies the margin gates to a score already produced for `x` and
    /// inserts into the bank accordingly. Exactly one of the three outcomes
    /// happens: OOD insert at scale kappa, ID insert at scale 1, or nothing.
    pub fn augment(&mut self, x: &FeatureVector, score: f64) -> Result<Augmentation> {
        let z = self.prepared(x)?;
        self.augment_prepared(z, score)
    }

    /// Inserts a sample whose distribution side is known out of band,
    /// bypassing the gates (used to pre-seed accessible OOD samples).
    /// Applies the engine's normalization before storing.
    pub fn insert_known(
        &mut self,
        x: FeatureVector,
        scale: f64,
        provenance: Provenance,
    ) -> Result<()> {
        let z = self.prepared(&x)?;
        self.bank.insert(z, scale, provenance)
    }

    fn augment_prepared(&mut self, z: FeatureVector, score: f64) -> Result<Augmentation> {
        let action = match self.config.gamma {
            Margin::Infinite => Augmentation::None,
            Margin::Finite(g) => {
                let lambda = self.config.lambda;
                if score < lambda * g {
                    Augmentation::AsOod
                } else if score > lambda / g {
                    Augmentation::AsId
                } else {
                    Augmentation::None
                }
            }
        };
        match action {
            Augmentation::AsOod => {
                self.bank
                    .insert(z, self.config.kappa, Provenance::AugmentedOod)?
            }
            Augmentation::AsId => self.bank.insert(z, 1.0, Provenance::AugmentedId)?,
            Augmentation::None => {}
        }
        Ok(action)
    }

    /// Streams samples in order: decide, then (when adaptation is on)
    /// augment, then advance. Deterministic given config and input order.
    pub fn process_stream(&mut self, samples: &[FeatureVector]) -> Result<Vec<DecisionRecord>> {
        self.process_stream_with_stats(samples).map(|(r, _)| r)
    }

    /// [`Engine::process_stream`] plus mean wall-clock microseconds spent in
    /// the decide step.
    pub fn process_stream_with_stats(
        &mut self,
        samples: &[FeatureVector],
    ) -> Result<(Vec<DecisionRecord>, StreamStats)> {
        let mut records = Vec::with_capacity(samples.len());
        let mut decide_nanos: u128 = 0;
        for (i, x) in samples.iter().enumerate() {
            let bank_size_before = self.bank.len();
            let started = Instant::now();
            let z = self.prepared(x)?;
            let neighbors = self.bank.knn_query(&z, self.config.k)?;
            let score = scoring::score(&neighbors, self.config.combinator)?;
            let verdict = self.verdict_for(score);
            decide_nanos += started.elapsed().as_nanos();
            let augmentation = if self.config.adapt {
                self.augment_prepared(z, score)?
            } else {
                Augmentation::None
            };
            records.push(DecisionRecord {
                sample_index: i as u64,
                score,
                verdict,
                augmentation,
                bank_size_before,
            });
        }
        let stats = StreamStats {
            mean_decide_micros: if samples.is_empty() {
                0.0
            } else {
                decide_nanos as f64 / 1000.0 / samples.len() as f64
            },
        };
        Ok((records, stats))
    }

    /// Fraction of ID validation samples still accepted, scored against the
    /// current (possibly augmented) bank with the original lambda. Read-only.
    pub fn reevaluate_id(&self, id_val: &[FeatureVector]) -> Result<f64> {
        if id_val.is_empty() {
            return Err(Error::EmptyInput);
        }
        let scores = self.batch_scores(id_val)?;
        let accepted = scores.iter().filter(|s| **s >= self.config.lambda).count();
        Ok(accepted as f64 / id_val.len() as f64)
    }

    /// Log-ratio score with labels estimated from provenance: augmented-OOD
    /// entries count as OOD, everything else as ID.
    pub fn log_ratio_score_estimated(&self, x: &FeatureVector) -> Result<f64> {
        self.log_ratio_score_with(x, |provenance, _seq| {
            Some(match provenance {
                Provenance::AugmentedOod => DistributionLabel::Ood,
                _ => DistributionLabel::Id,
            })
        })
    }

    /// Log-ratio score with caller-supplied ground-truth labels per bank
    /// entry (by provenance and insertion sequence). Returning `None` for a
    /// selected neighbor yields [`Error::MissingLabel`].
    pub fn log_ratio_score_with(
        &self,
        x: &FeatureVector,
        label_of: impl Fn(Provenance, u64) -> Option<DistributionLabel>,
    ) -> Result<f64> {
        let neighbors = self.neighbors(x)?;
        let labeled: Vec<LabeledNeighbor> = neighbors
            .iter()
            .map(|n| {
                let entry = &self.bank.entries()[n.entry_ref];
                LabeledNeighbor {
                    dist: n.dist,
                    scale: n.scale,
                    label: label_of(entry.provenance(), entry.insert_seq()),
                }
            })
            .collect();
        scoring::log_ratio_score(&labeled)
    }
}
