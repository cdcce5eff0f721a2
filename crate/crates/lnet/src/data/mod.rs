//! Dataset ingestion: raw-file parsing, label taxonomies, feature-grid
//! encoding, stratified splitting and the half-overlapping batch schedule
//! that batch-wise self-distillation relies on.

pub mod archive;
pub mod cicids;
pub mod encode;
pub mod normalize;
pub mod nslkdd;
pub mod schedule;
pub mod split;
pub mod synthetic;

pub use archive::{ArchiveHeader, EncodedDataset, Geometry, IngestReport, SplitSpec};
pub use normalize::Bounds;
pub use schedule::{overlap_batches, BatchSchedule};
pub use split::stratified_split;

use serde::{Deserialize, Serialize};

/// How rows with NaN/Infinity numeric fields are treated at parse time.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NanPolicy {
    /// Drop the row and count it in the ingestion report (default).
    Drop,
    /// Keep the row: NaN becomes 0, ±Infinity becomes ±1e12 before scaling.
    Clamp,
}

impl Default for NanPolicy {
    fn default() -> Self {
        NanPolicy::Drop
    }
}

/// Per-class counts plus raw feature dimension, produced by the parsers.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetSummary {
    pub class_names: Vec<String>,
    pub class_counts: Vec<u64>,
    pub total: u64,
    pub raw_feature_dim: usize,
}

impl DatasetSummary {
    pub(crate) fn new(class_names: &[&str], class_counts: Vec<u64>, raw_feature_dim: usize) -> Self {
        let total = class_counts.iter().sum();
        DatasetSummary {
            class_names: class_names.iter().map(|s| s.to_string()).collect(),
            class_counts,
            total,
            raw_feature_dim,
        }
    }
}
