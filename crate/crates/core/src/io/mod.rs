//! File formats and run configuration: the ODDF binary feature format, CSV
//! import/export, JSON run configs and JSONL decision logs.

pub mod config;
pub mod csv;
pub mod oddf;

pub use config::{config_hash, DetectorSettings, RunConfig, SynthSettings};
pub use csv::{read_csv_features, write_csv_features};
pub use oddf::{read_features, write_features, SampleLabel, ODDF_MAGIC, ODDF_VERSION};
