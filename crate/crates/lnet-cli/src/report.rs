//! Report files: metrics.json, confusion.csv and archive hashing.

use std::path::Path;

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::RunConfig;
use lnet::metrics::ConfusionMatrix;
use lnet::train::MetricsReport;

/// SHA-256 of a file's bytes, hex-encoded.
pub fn file_sha256(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).with_context(|| format!("hashing {}", path.display()))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

/// The metrics.json schema. Timestamps are deliberately absent: two runs
/// with equal config and archive hash produce byte-identical reports.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MetricsJson {
    pub config: RunConfig,
    pub archive_sha256: String,
    pub dataset: String,
    pub variant: String,
    pub seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub best_epoch: Option<usize>,
    pub accuracy: f64,
    pub macro_precision: f64,
    pub macro_recall: f64,
    pub macro_f1: f64,
    pub params: u64,
    pub flops: u64,
    pub confusion_matrix: Vec<Vec<u64>>,
}

impl MetricsJson {
    pub fn new(config: &RunConfig, archive_sha256: &str, best_epoch: Option<usize>, report: &MetricsReport) -> Self {
        MetricsJson {
            config: config.clone(),
            archive_sha256: archive_sha256.to_string(),
            dataset: config.dataset.clone(),
            variant: config.variant.clone(),
            seed: config.seed,
            best_epoch,
            accuracy: report.accuracy,
            macro_precision: report.macro_precision,
            macro_recall: report.macro_recall,
            macro_f1: report.macro_f1,
            params: report.params,
            flops: report.flops,
            confusion_matrix: report.confusion.rows(),
        }
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)? + "\n")
            .with_context(|| format!("writing {}", path.display()))?;
        Ok(())
    }
}

/// M×M integer table with a class-name header row and column.
pub fn confusion_csv(cm: &ConfusionMatrix, class_names: &[String]) -> String {
    let mut out = String::from("class");
    for name in class_names {
        out.push(',');
        out.push_str(name);
    }
    out.push('\n');
    for (t, row) in cm.rows().iter().enumerate() {
        out.push_str(&class_names[t]);
        for cell in row {
            out.push_str(&format!(",{cell}"));
        }
        out.push('\n');
    }
    out
}
