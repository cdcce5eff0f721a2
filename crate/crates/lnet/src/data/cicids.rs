//! CICIDS2017 parsing and the 6-class grouping.
//!
//! Input is the headered MachineLearningCVE daily CSVs: every column except
//! `Label` is numeric. Labels group into Benign / DoS+DDoS / PortScan /
//! BruteForce / WebAttack / Botnet; `Infiltration` has no slot in that
//! taxonomy and is excluded with a count. The corpus contains NaN/Infinity
//! in the rate columns and one file with a non-UTF-8 byte in its web-attack
//! labels, so files are decoded lossily and label matching is prefix-based.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use crate::data::{DatasetSummary, NanPolicy};
use crate::error::{Error, Result};

pub const CICIDS_CLASSES: [&str; 6] = ["Benign", "DoS/DDoS", "PortScan", "BruteForce", "WebAttack", "Botnet"];

/// Row-level outcome of label grouping.
enum LabelGroup {
    Class(usize),
    Excluded,
}

fn group_label(raw: &str) -> Result<LabelGroup> {
    let label = raw.trim();
    let group = if label.eq_ignore_ascii_case("BENIGN") {
        LabelGroup::Class(0)
    } else if label.starts_with("DoS") || label.starts_with("DDoS") || label == "Heartbleed" {
        LabelGroup::Class(1)
    } else if label == "PortScan" {
        LabelGroup::Class(2)
    } else if label == "FTP-Patator" || label == "SSH-Patator" {
        LabelGroup::Class(3)
    } else if label.starts_with("Web Attack") {
        LabelGroup::Class(4)
    } else if label == "Bot" {
        LabelGroup::Class(5)
    } else if label == "Infiltration" {
        LabelGroup::Excluded
    } else {
        return Err(Error::UnknownLabel { label: label.to_string(), path: String::new(), line: 0 });
    };
    Ok(group)
}

/// One grouped flow record.
#[derive(Debug, Clone)]
pub struct CicidsRecord {
    pub features: Vec<f64>,
    pub class: usize,
}

/// Parse counters reported by ingestion.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CicidsParseStats {
    pub rows_read: u64,
    pub class_counts: Vec<u64>,
    pub dropped_nonfinite: u64,
    pub excluded_labels: BTreeMap<String, u64>,
    pub feature_dim: usize,
}

fn parse_numeric(field: &str, path: &str, line: usize, col: usize) -> Result<f64> {
    let s = field.trim();
    if s.is_empty() {
        return Ok(0.0);
    }
    match s {
        "Infinity" | "inf" | "Inf" => return Ok(f64::INFINITY),
        "-Infinity" | "-inf" | "-Inf" => return Ok(f64::NEG_INFINITY),
        "NaN" | "nan" => return Ok(f64::NAN),
        _ => {}
    }
    s.parse().map_err(|_| Error::Parse {
        path: path.to_string(),
        line,
        msg: format!("column {col} is not numeric: {s:?}"),
    })
}

/// Streams every valid row of the given files, in file order then line
/// order, to `sink(features, class)`. Returns the parse counters. Rows
/// failing the NaN policy or carrying excluded labels are counted, not
/// forwarded.
pub fn for_each_cicids_row(
    paths: &[impl AsRef<Path>],
    nan_policy: NanPolicy,
    mut sink: impl FnMut(&[f64], usize) -> Result<()>,
) -> Result<CicidsParseStats> {
    let mut stats = CicidsParseStats { class_counts: vec![0; CICIDS_CLASSES.len()], ..Default::default() };
    for path in paths {
        let path = path.as_ref();
        let display = path.display().to_string();
        let bytes = fs::read(path)?;
        let text = String::from_utf8_lossy(&bytes);
        let mut reader = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(text.as_bytes());
        let headers = reader
            .headers()
            .map_err(|e| Error::Parse { path: display.clone(), line: 1, msg: e.to_string() })?
            .clone();
        let label_col = headers
            .iter()
            .position(|h| h.trim().eq_ignore_ascii_case("label"))
            .ok_or_else(|| Error::Parse { path: display.clone(), line: 1, msg: "no Label column in header".into() })?;
        let dim = headers.len() - 1;
        if stats.feature_dim == 0 {
            stats.feature_dim = dim;
        } else if stats.feature_dim != dim {
            return Err(Error::Parse {
                path: display.clone(),
                line: 1,
                msg: format!("feature column count {dim} differs from earlier files ({})", stats.feature_dim),
            });
        }
        let mut features = vec![0.0f64; dim];
        for (i, row) in reader.records().enumerate() {
            let line = i + 2; // header is line 1
            let row = row.map_err(|e| Error::Parse { path: display.clone(), line, msg: e.to_string() })?;
            if row.len() != headers.len() {
                return Err(Error::Parse {
                    path: display.clone(),
                    line,
                    msg: format!("expected {} fields, got {}", headers.len(), row.len()),
                });
            }
            stats.rows_read += 1;
            let raw_label = &row[label_col];
            let class = match group_label(raw_label) {
                Ok(LabelGroup::Class(c)) => c,
                Ok(LabelGroup::Excluded) => {
                    *stats.excluded_labels.entry(raw_label.trim().to_string()).or_insert(0) += 1;
                    continue;
                }
                Err(Error::UnknownLabel { label, .. }) => {
                    return Err(Error::UnknownLabel { label, path: display.clone(), line })
                }
                Err(e) => return Err(e),
            };
            let mut fi = 0;
            let mut nonfinite = false;
            for (col, field) in row.iter().enumerate() {
                if col == label_col {
                    continue;
                }
                let mut v = parse_numeric(field, &display, line, col)?;
                if !v.is_finite() {
                    match nan_policy {
                        NanPolicy::Drop => {
                            nonfinite = true;
                            break;
                        }
                        NanPolicy::Clamp => {
                            v = if v.is_nan() {
                                0.0
                            } else if v > 0.0 {
                                1e12
                            } else {
                                -1e12
                            };
                        }
                    }
                }
                features[fi] = v;
                fi += 1;
            }
            if nonfinite {
                stats.dropped_nonfinite += 1;
                continue;
            }
            stats.class_counts[class] += 1;
            sink(&features, class)?;
        }
    }
    Ok(stats)
}

/// Materializing parser for modest inputs (fixtures, subsamples); the CLI
/// ingests the full corpus through [`for_each_cicids_row`] instead.
pub fn parse_cicids(paths: &[impl AsRef<Path>], nan_policy: NanPolicy) -> Result<(Vec<CicidsRecord>, DatasetSummary, CicidsParseStats)> {
    let mut records = Vec::new();
    let stats = for_each_cicids_row(paths, nan_policy, |features, class| {
        records.push(CicidsRecord { features: features.to_vec(), class });
        Ok(())
    })?;
    let summary = DatasetSummary::new(&CICIDS_CLASSES, stats.class_counts.clone(), stats.feature_dim);
    Ok((records, summary, stats))
}
