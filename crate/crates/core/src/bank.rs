//! The scaled feature store searched by exact k-nearest-neighbor queries.
//!
//! A bank holds `(vector, scale)` pairs. In-distribution training entries
//! carry scale 1; entries augmented online as OOD carry a scale >= 1 that
//! pushes scores of nearby queries down. The bank only grows; there is no
//! eviction. Search is an exact linear scan with a bounded max-heap, so
//! results are always identical to a brute-force scan, and insertion is a
//! plain append with no index rebuild.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{distance, FeatureVector, UNIT_NORM_TOL};

/// Where a stored entry came from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    /// Initial in-distribution training feature (scale exactly 1).
    IdTrain,
    /// Test sample augmented as confidently in-distribution (scale exactly 1).
    AugmentedId,
    /// Test sample augmented as confidently out-of-distribution (scale >= 1).
    AugmentedOod,
}

/// A stored feature with its scale and insertion order.
#[derive(Clone, Debug)]
pub struct MemoryEntry {
    vector: FeatureVector,
    scale: f64,
    provenance: Provenance,
    insert_seq: u64,
}

impl MemoryEntry {
    pub fn vector(&self) -> &FeatureVector {
        &self.vector
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn provenance(&self) -> Provenance {
        self.provenance
    }

    pub fn insert_seq(&self) -> u64 {
        self.insert_seq
    }
}

/// A query result: index into the bank, distance to the query, entry scale.
///
/// Neighbor lists are sorted ascending by distance with ties broken by
/// ascending insertion order, which makes replays deterministic.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Neighbor {
    pub entry_ref: usize,
    pub dist: f64,
    pub scale: f64,
}

/// Append-only store of scaled features with exact kNN search.
#[derive(Clone, Debug)]
pub struct MemoryBank {
    entries: Vec<MemoryEntry>,
    dim: usize,
    normalized: bool,
}

impl MemoryBank {
    /// Initializes the bank from in-distribution features, one scale-1
    /// `IdTrain` entry per feature. Vectors are normalized iff `normalize`.
    pub fn init(features: Vec<FeatureVector>, normalize: bool) -> Result<Self> {
        if features.is_empty() {
            return Err(Error::EmptyInput);
        }
        let dim = features[0].dim();
        let mut entries = Vec::with_capacity(features.len());
        for (i, feature) in features.into_iter().enumerate() {
            if feature.dim() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: feature.dim(),
                });
            }
            let vector = if normalize {
                feature.normalized()?
            } else {
                feature
            };
            entries.push(MemoryEntry {
                vector,
                scale: 1.0,
                provenance: Provenance::IdTrain,
                insert_seq: i as u64,
            });
        }
        Ok(Self {
            entries,
            dim,
            normalized: normalize,
        })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// True when the bank was built to hold unit-norm vectors.
    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    pub fn entries(&self) -> &[MemoryEntry] {
        &self.entries
    }

    pub fn entry(&self, index: usize) -> Option<&MemoryEntry> {
        self.entries.get(index)
    }

    /// Counts of (IdTrain, AugmentedId, AugmentedOod) entries.
    pub fn provenance_counts(&self) -> (usize, usize, usize) {
        let mut counts = (0, 0, 0);
        for e in &self.entries {
            match e.provenance {
                Provenance::IdTrain => counts.0 += 1,
                Provenance::AugmentedId => counts.1 += 1,
                Provenance::AugmentedOod => counts.2 += 1,
            }
        }
        counts
    }

    /// Appends an entry. The new entry is visible to the next query.
    ///
    /// Scales below 1 are rejected, and ID-side provenance requires scale
    /// exactly 1. Callers are responsible for normalizing `vector` when the
    /// bank was built normalized; the detector always does.
    pub fn insert(
        &mut self,
        vector: FeatureVector,
        scale: f64,
        provenance: Provenance,
    ) -> Result<()> {
        if vector.dim() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: vector.dim(),
            });
        }
        if !scale.is_finite() || scale < 1.0 {
            return Err(Error::InvalidScale {
                scale,
                reason: "scale must be finite and >= 1",
            });
        }
        match provenance {
            Provenance::IdTrain | Provenance::AugmentedId if scale != 1.0 => {
                return Err(Error::InvalidScale {
                    scale,
                    reason: "ID-side entries must have scale exactly 1",
                });
            }
            _ => {}
        }
        debug_assert!(
            !self.normalized || (vector.norm() - 1.0).abs() <= UNIT_NORM_TOL,
            "normalized bank requires unit-norm inserts"
        );
        let insert_seq = self.entries.len() as u64;
        self.entries.push(MemoryEntry {
            vector,
            scale,
            provenance,
            insert_seq,
        });
        Ok(())
    }

    /// Exact k-nearest-neighbor query.
    ///
    /// Returns `min(k, len)` neighbors sorted ascending by distance, ties
    /// broken by ascending insertion order — byte-for-byte the result of a
    /// stable brute-force scan. Entry scales never influence selection.
    pub fn knn_query(&self, query: &FeatureVector, k: usize) -> Result<Vec<Neighbor>> {
        if k == 0 {
            return Err(Error::InvalidK);
        }
        if self.entries.is_empty() {
            return Err(Error::EmptyBank);
        }
        if query.dim() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: query.dim(),
            });
        }

        // Bounded max-heap over (dist, seq); keeps the k lexicographically
        // smallest pairs seen so far.
        let mut heap: BinaryHeap<HeapItem> = BinaryHeap::with_capacity(k + 1);
        for (idx, entry) in self.entries.iter().enumerate() {
            let dist = distance(query, &entry.vector)?;
            let item = HeapItem {
                dist,
                seq: entry.insert_seq,
                idx,
            };
            if heap.len() < k {
                heap.push(item);
            } else if let Some(top) = heap.peek() {
                if item.cmp(top) == Ordering::Less {
                    heap.pop();
                    heap.push(item);
                }
            }
        }
        let neighbors = heap
            .into_sorted_vec()
            .into_iter()
            .map(|item| Neighbor {
                entry_ref: item.idx,
                dist: item.dist,
                scale: self.entries[item.idx].scale,
            })
            .collect();
        Ok(neighbors)
    }
}

#[derive(Debug)]
struct HeapItem {
    dist: f64,
    seq: u64,
    idx: usize,
}

impl PartialEq for HeapItem {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for HeapItem {}

impl PartialOrd for HeapItem {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for HeapItem {
    fn cmp(&self, other: &Self) -> Ordering {
        // Distances are finite by construction, so total_cmp is a plain
        // numeric order here.
        self.dist
            .total_cmp(&other.dist)
            .then(self.seq.cmp(&other.seq))
    }
}
