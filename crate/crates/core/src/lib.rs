//! Streaming out-of-distribution detection with an adaptive k-NN memory
//! bank.
//!
//! Test embeddings are scored by their scaled distance to the k nearest
//! entries of a memory bank initialized from in-distribution features. The
//! engine adapts online: test samples that score confidently OOD are
//! inserted back into the bank with a large scale so that later samples
//! near them score lower, and confidently-ID samples are inserted at scale
//! one. Evaluation harnesses, FPR/AUROC metrics, synthetic Gaussian
//! experiments, binary/CSV feature formats and a CLI sit on top.
//!
//! ```
//! use oddstream::prelude::*;
//!
//! let id: Vec<FeatureVector> = (0..100)
//!     .map(|i| FeatureVector::new(vec![(i % 10) as f64 * 0.1, (i / 10) as f64 * 0.1]).unwrap())
//!     .collect();
//! let bank = MemoryBank::init(id.clone(), false).unwrap();
//! let mut engine = Engine::new(bank, DetectorConfig {
//!     k: 5,
//!     lambda: 0.0,
//!     gamma: Margin::Finite(1.5),
//!     kappa: 5.0,
//!     combinator: Combinator::KAvg,
//!     normalize: false,
//!     adapt: true,
//! }).unwrap();
//! engine.calibrate(&id, 0.95).unwrap();
//! let record = engine.decide(&FeatureVector::new(vec![5.0, 5.0]).unwrap()).unwrap();
//! assert_eq!(record.verdict, Verdict::Ood);
//! ```

pub mod bank;
pub mod cli;
pub mod detector;
pub mod error;
pub mod geometry;
pub mod io;
pub mod metrics;
pub mod protocols;
pub mod scoring;

pub use error::{Error, Result};

pub mod prelude {
    pub use crate::bank::{MemoryBank, MemoryEntry, Neighbor, Provenance};
    pub use crate::detector::{
        calibrate_threshold, Augmentation, DecisionRecord, DetectorConfig, Engine, Margin,
        Verdict, DEFAULT_TPR_TARGET,
    };
    pub use crate::error::{Error, Result};
    pub use crate::geometry::{distance, FeatureVector};
    pub use crate::metrics::{auroc, fpr_at_tpr, DatasetMetrics, EvalReport, ScoredPopulation};
    pub use crate::protocols::{
        algorithm2_sweep, analytic_boundary_accuracy, boundary_sweep,
        monte_carlo_boundary_accuracy, run_algorithm2, run_clusters_comparison, run_protocol,
        sample_gaussian, Algorithm2Params, BoundarySweepParams, ClustersParams, DatasetRef,
        GaussianSpec, ProtocolKind, ProtocolSpec, TrendPoint,
    };
    pub use crate::scoring::{
        log_ratio_score, score, Combinator, DistributionLabel, LabeledNeighbor, ScoreConfig,
        ScoreVariant,
    };
}
