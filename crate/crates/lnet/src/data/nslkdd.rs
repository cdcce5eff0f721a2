//! NSL-KDD parsing, the 5-class label taxonomy and the one-hot encoder.
//!
//! Records carry 41 features (`protocol_type`, `service`, `flag` categorical
//! at positions 1–3, the other 38 numeric) plus the label and an optional
//! difficulty field. The attack→category map ships as a data file.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::data::DatasetSummary;
use crate::error::{Error, Result};

pub const NSLKDD_CLASSES: [&str; 5] = ["Normal", "DoS", "Probe", "R2L", "U2R"];
pub const NUM_FEATURES: usize = 41;
pub const NUM_NUMERIC: usize = 38;
/// Positions of the categorical features within the 41-feature row.
pub const CATEGORICAL_POSITIONS: [usize; 3] = [1, 2, 3];

const ATTACK_MAP: &str = include_str!("../../data/nslkdd_attack_map.txt");

fn attack_map() -> &'static BTreeMap<String, usize> {
    static MAP: OnceLock<BTreeMap<String, usize>> = OnceLock::new();
    MAP.get_or_init(|| {
        let mut map = BTreeMap::new();
        for line in ATTACK_MAP.lines() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (label, category) = line.split_once(',').expect("attack map lines are label,category");
            let class = NSLKDD_CLASSES
                .iter()
                .position(|c| c.eq_ignore_ascii_case(category))
                .expect("attack map categories are valid");
            map.insert(label.to_string(), class);
        }
        map
    })
}

/// Maps a raw NSL-KDD label to its class index, never silently.
pub fn map_nslkdd_label(raw: &str) -> Result<usize> {
    let key = raw.trim().trim_end_matches('.').to_ascii_lowercase();
    attack_map().get(&key).copied().ok_or_else(|| Error::UnknownLabel {
        label: raw.to_string(),
        path: String::new(),
        line: 0,
    })
}

/// One parsed NSL-KDD row: the three categorical field values, the 38
/// numeric features in schema order, and the mapped class.
#[derive(Debug, Clone)]
pub struct NslkddRecord {
    pub protocol: String,
    pub service: String,
    pub flag: String,
    pub numeric: Vec<f64>,
    pub label: String,
    pub class: usize,
}

/// Parses the given files in order (comma-separated, 42 or 43 fields per
/// line) and reports class counts after label mapping.
pub fn parse_nslkdd(paths: &[impl AsRef<Path>]) -> Result<(Vec<NslkddRecord>, DatasetSummary)> {
    let mut records = Vec::new();
    let mut counts = vec![0u64; NSLKDD_CLASSES.len()];
    for path in paths {
        let path = path.as_ref();
        let display = path.display().to_string();
        let reader = BufReader::new(File::open(path)?);
        for (idx, line) in reader.lines().enumerate() {
            let line = line?;
            let line = line.trim_end_matches(['\r', '\n']);
            if line.is_empty() {
                continue;
            }
            let record = parse_line(line, &display, idx + 1)?;
            counts[record.class] += 1;
            records.push(record);
        }
    }
    let summary = DatasetSummary::new(&NSLKDD_CLASSES, counts, NUM_FEATURES);
    Ok((records, summary))
}

fn parse_line(line: &str, path: &str, line_no: usize) -> Result<NslkddRecord> {
    let fields: Vec<&str> = line.split(',').collect();
    if fields.len() != NUM_FEATURES + 1 && fields.len() != NUM_FEATURES + 2 {
        return Err(Error::Parse {
            path: path.to_string(),
            line: line_no,
            msg: format!("expected {} or {} fields, got {}", NUM_FEATURES + 1, NUM_FEATURES + 2, fields.len()),
        });
    }
    let label = fields[NUM_FEATURES].trim().to_string();
    let class = map_nslkdd_label(&label).map_err(|_| Error::UnknownLabel {
        label: label.clone(),
        path: path.to_string(),
        line: line_no,
    })?;
    let mut numeric = Vec::with_capacity(NUM_NUMERIC);
    for (pos, field) in fields[..NUM_FEATURES].iter().enumerate() {
        if CATEGORICAL_POSITIONS.contains(&pos) {
            continue;
        }
        let value: f64 = field.trim().parse().map_err(|_| Error::Parse {
            path: path.to_string(),
            line: line_no,
            msg: format!("feature {pos} is not numeric: {field:?}"),
        })?;
        numeric.push(value);
    }
    Ok(NslkddRecord {
        protocol: fields[1].trim().to_string(),
        service: fields[2].trim().to_string(),
        flag: fields[3].trim().to_string(),
        numeric,
        label,
        class,
    })
}

/// Sorted categorical vocabularies; fixes the one-hot layout.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NslkddVocab {
    pub protocols: Vec<String>,
    pub services: Vec<String>,
    pub flags: Vec<String>,
}

impl NslkddVocab {
    pub fn fit(records: &[NslkddRecord]) -> Self {
        let mut protocols: Vec<String> = records.iter().map(|r| r.protocol.clone()).collect();
        let mut services: Vec<String> = records.iter().map(|r| r.service.clone()).collect();
        let mut flags: Vec<String> = records.iter().map(|r| r.flag.clone()).collect();
        for v in [&mut protocols, &mut services, &mut flags] {
            v.sort_unstable();
            v.dedup();
        }
        NslkddVocab { protocols, services, flags }
    }

    /// One-hot width plus the 38 numeric features.
    pub fn encoded_dim(&self) -> usize {
        self.protocols.len() + self.services.len() + self.flags.len() + NUM_NUMERIC
    }
}
