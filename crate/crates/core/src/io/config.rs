//! JSON run configuration.
//!
//! A run config carries the detector tuple, calibration target, seed and
//! synthetic-suite parameters. Unknown keys are rejected. Every command
//! re-serializes the fully-resolved config (after CLI overrides) alongside
//! its outputs, and a SHA-256 of that serialization is embedded in every
//! artifact so runs can be matched to their exact configuration.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::detector::{DetectorConfig, Margin};
use crate::error::{Error, Result};
use crate::scoring::Combinator;

/// Detector parameters as they appear in config files. `lambda` is optional:
/// absent means "calibrate from the validation set".
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DetectorSettings {
    pub k: usize,
    pub lambda: Option<f64>,
    pub gamma: Margin,
    pub kappa: f64,
    pub combinator: Combinator,
    pub normalize: bool,
    pub adapt: bool,
}

impl Default for DetectorSettings {
    fn default() -> Self {
        Self {
            k: 50,
            lambda: None,
            gamma: Margin::Finite(1.5),
            kappa: 5.0,
            combinator: Combinator::KAvg,
            normalize: true,
            adapt: true,
        }
    }
}

impl DetectorSettings {
    /// Materializes a [`DetectorConfig`], supplying the threshold when the
    /// config did not pin one.
    pub fn to_detector_config(self, lambda: f64) -> DetectorConfig {
        DetectorConfig {
            k: self.k,
            lambda: self.lambda.unwrap_or(lambda),
            gamma: self.gamma,
            kappa: self.kappa,
            combinator: self.combinator,
            normalize: self.normalize,
            adapt: self.adapt,
        }
    }
}

/// Parameters of the synthetic Gaussian suite.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SynthSettings {
    /// 1-D experiments: ID distribution.
    pub id_mean: f64,
    pub id_std: f64,
    /// 1-D experiments: OOD distribution.
    pub ood_mean: f64,
    pub ood_std: f64,
    pub id_count: usize,
    pub val_count: usize,
    pub ood_count: usize,
    pub repeats: usize,
    /// Neighbor count for the pre-seeded-memory experiment.
    pub k: usize,
    /// OOD scale for the pre-seeded-memory experiment.
    pub kappa: f64,
    /// Accessible-OOD sweep of the pre-seeded-memory experiment.
    pub m_values: Vec<usize>,
    /// Decision thresholds for the boundary-accuracy sweep; `None` selects
    /// a 1.00..=2.50 grid in steps of 0.05 plus 1.96.
    pub thresholds: Option<Vec<f64>>,
    /// Monte-Carlo draw count per population for the boundary sweep.
    pub mc_draws: usize,
    /// Monte-Carlo seed count for the boundary sweep.
    pub mc_seeds: u64,
    /// Overlapping-clusters comparison: dimension and OOD cluster shape.
    pub cluster_dim: usize,
    pub cluster_ood_mean: f64,
    pub cluster_ood_std: f64,
    pub cluster_bank_count: usize,
    pub cluster_val_count: usize,
    pub cluster_stream_count: usize,
    pub cluster_seeds: u64,
}

impl Default for SynthSettings {
    fn default() -> Self {
        Self {
            id_mean: 0.0,
            id_std: 1.0,
            ood_mean: 2.0,
            ood_std: 0.5,
            id_count: 5000,
            val_count: 5000,
            ood_count: 5000,
            repeats: 20,
            k: 100,
            kappa: 100.0,
            m_values: vec![0, 1, 5, 10, 50, 100, 500],
            thresholds: None,
            mc_draws: 5000,
            mc_seeds: 20,
            cluster_dim: 8,
            cluster_ood_mean: 1.5,
            cluster_ood_std: 0.5,
            cluster_bank_count: 5000,
            cluster_val_count: 2000,
            cluster_stream_count: 2000,
            cluster_seeds: 10,
        }
    }
}

impl SynthSettings {
    /// The boundary-sweep threshold grid: configured values, or
    /// 1.00..=2.50 in 0.05 steps with 1.96 added.
    pub fn threshold_grid(&self) -> Vec<f64> {
        match &self.thresholds {
            Some(ts) => ts.clone(),
            None => {
                let mut grid: Vec<i64> = (100..=250).step_by(5).map(|i| i as i64).collect();
                grid.push(196);
                grid.sort_unstable();
                grid.dedup();
                grid.into_iter().map(|i| i as f64 / 100.0).collect()
            }
        }
    }
}

/// Top-level run configuration.
#[derive(Clone, Debug, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub detector: DetectorSettings,
    #[serde(
        skip_serializing_if = "Option::is_none",
        default = "default_tpr_target_opt"
    )]
    pub tpr_target: Option<f64>,
    pub seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub synth: Option<SynthSettings>,
}

fn default_tpr_target_opt() -> Option<f64> {
    None
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: impl AsRef<std::path::Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json(&text)
    }

    pub fn tpr_target(&self) -> f64 {
        self.tpr_target.unwrap_or(crate::detector::DEFAULT_TPR_TARGET)
    }

    pub fn synth(&self) -> SynthSettings {
        self.synth.clone().unwrap_or_default()
    }

    /// The fully-resolved form: every optional filled in, suitable for
    /// embedding in outputs and hashing.
    pub fn resolved(&self) -> RunConfig {
        RunConfig {
            detector: self.detector,
            tpr_target: Some(self.tpr_target()),
            seed: self.seed,
            synth: Some(self.synth()),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("config serializes")
    }
}

/// SHA-256 (lowercase hex) of a resolved config's canonical JSON form.
pub fn config_hash(config: &RunConfig) -> String {
    let canonical = config.resolved().to_json();
    let digest = Sha256::digest(canonical.as_bytes());
    hex::encode(digest)
}
