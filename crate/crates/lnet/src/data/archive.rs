//! Encoded-archive format and the dataset ingestion drivers.
//!
//! Archive layout: `"LNSA"` magic, u16 format version, u32 header length,
//! UTF-8 JSON header (schema version, geometry, label map, normalization
//! bounds, per-class counts, split spec), then all grids as packed
//! little-endian f32 and all labels as little-endian u32, in canonical parse
//! order. Split membership is not stored: it is recomputed at load time by
//! re-running the seeded stratified split on the stored labels, which is
//! bit-stable, and the result is checked against the header counts.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::cicids::{for_each_cicids_row, CICIDS_CLASSES};
use crate::data::encode::{encode_nslkdd, encode_numeric, grid_side, EncodedSample};
use crate::data::normalize::Bounds;
use crate::data::nslkdd::{parse_nslkdd, NslkddVocab, NSLKDD_CLASSES};
use crate::data::split::stratified_split;
use crate::data::NanPolicy;
use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::tensor::Tensor;

const MAGIC: &[u8; 4] = b"LNSA";
const VERSION: u16 = 1;

/// Published per-class totals of the merged official NSL-KDD corpus
/// (KDDTrain+ ∪ KDDTest+).
pub const NSLKDD_REFERENCE_COUNTS: [u64; 5] = [77054, 53385, 14077, 3749, 252];
/// Published per-class totals of the preprocessed CICIDS2017 corpus the
/// 6-class taxonomy targets.
pub const CICIDS_REFERENCE_COUNTS: [u64; 6] = [2035505, 320469, 57305, 8551, 2118, 1943];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Geometry {
    pub channels: usize,
    pub height: usize,
    pub width: usize,
}

impl Geometry {
    pub fn plane(&self) -> usize {
        self.channels * self.height * self.width
    }

    pub fn as_tuple(&self) -> (usize, usize, usize) {
        (self.channels, self.height, self.width)
    }
}

/// Seeded split recipe plus the per-split class counts it produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train_fraction: f64,
    pub seed: u64,
    pub train_count: u64,
    pub eval_count: u64,
    pub train_class_counts: Vec<u64>,
    pub eval_class_counts: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArchiveHeader {
    pub schema_version: u32,
    pub dataset: String,
    pub geometry: Geometry,
    pub label_map: Vec<String>,
    pub feature_dim: usize,
    pub class_counts: Vec<u64>,
    pub normalization: Option<Bounds>,
    pub nslkdd_vocab: Option<NslkddVocab>,
    pub split: SplitSpec,
    pub num_samples: u64,
}

/// In-memory encoded dataset: header, packed grids, labels, and the
/// recomputed split membership.
#[derive(Debug, Clone)]
pub struct EncodedDataset {
    header: ArchiveHeader,
    grids: Vec<f32>,
    labels: Vec<u32>,
    train_ids: Vec<u32>,
    eval_ids: Vec<u32>,
}

impl EncodedDataset {
    /// Builds a dataset from encoded grids and labels, computing the split
    /// and per-class counts.
    #[allow(clippy::too_many_arguments)]
    pub fn assemble(
        dataset: &str,
        geometry: Geometry,
        label_map: &[&str],
        feature_dim: usize,
        normalization: Option<Bounds>,
        nslkdd_vocab: Option<NslkddVocab>,
        grids: Vec<f32>,
        labels: Vec<u32>,
        train_fraction: f64,
        seed: u64,
    ) -> Result<Self> {
        let plane = geometry.plane();
        if grids.len() != labels.len() * plane {
            return Err(Error::shape(
                "archive",
                format!("{} grid values for {} samples of {plane} cells", grids.len(), labels.len()),
            ));
        }
        if labels.is_empty() {
            return Err(Error::invalid("archive", "no samples to archive"));
        }
        let m = label_map.len();
        let mut class_counts = vec![0u64; m];
        for &y in &labels {
            let slot = class_counts
                .get_mut(y as usize)
                .ok_or_else(|| Error::invalid("archive", format!("label {y} out of range for {m} classes")))?;
            *slot += 1;
        }
        if grids.iter().any(|v| !v.is_finite() || *v < 0.0 || *v > 1.0) {
            return Err(Error::invalid("archive", "grid values must lie in [0,1]"));
        }
        let (train_ids, eval_ids) = stratified_split(&labels, m, train_fraction, seed)?;
        let count_by_class = |ids: &[u32]| {
            let mut c = vec![0u64; m];
            for &i in ids {
                c[labels[i as usize] as usize] += 1;
            }
            c
        };
        let split = SplitSpec {
            train_fraction,
            seed,
            train_count: train_ids.len() as u64,
            eval_count: eval_ids.len() as u64,
            train_class_counts: count_by_class(&train_ids),
            eval_class_counts: count_by_class(&eval_ids),
        };
        let header = ArchiveHeader {
            schema_version: 1,
            dataset: dataset.to_string(),
            geometry,
            label_map: label_map.iter().map(|s| s.to_string()).collect(),
            feature_dim,
            class_counts,
            normalization,
            nslkdd_vocab,
            split,
            num_samples: labels.len() as u64,
        };
        Ok(EncodedDataset { header, grids, labels, train_ids, eval_ids })
    }

    pub fn header(&self) -> &ArchiveHeader {
        &self.header
    }

    pub fn num_samples(&self) -> usize {
        self.labels.len()
    }

    pub fn num_classes(&self) -> usize {
        self.header.label_map.len()
    }

    pub fn geometry(&self) -> Geometry {
        self.header.geometry
    }

    pub fn label(&self, id: u32) -> usize {
        self.labels[id as usize] as usize
    }

    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    /// Grid of one sample as a `[C,H,W]` tensor in the requested precision.
    pub fn grid<F: Real>(&self, id: u32) -> Tensor<F> {
        let plane = self.header.geometry.plane();
        let start = id as usize * plane;
        let data = self.grids[start..start + plane].iter().map(|v| F::from_f64_c(*v as f64)).collect();
        let g = self.header.geometry;
        Tensor::new(vec![g.channels, g.height, g.width], data).expect("archive grids stay consistent")
    }

    pub fn sample(&self, id: u32) -> EncodedSample {
        EncodedSample { id, grid: self.grid::<f32>(id), label: self.label(id) }
    }

    pub fn train_ids(&self) -> &[u32] {
        &self.train_ids
    }

    pub fn eval_ids(&self) -> &[u32] {
        &self.eval_ids
    }

    /// Class counts over the training split, with empty classes lifted to 1
    /// so the class-balance weight stays defined.
    pub fn train_class_counts_nonzero(&self) -> Vec<u64> {
        self.header.split.train_class_counts.iter().map(|&c| c.max(1)).collect()
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let header_bytes = serde_json::to_vec(&self.header)?;
        let mut out = Vec::with_capacity(10 + header_bytes.len() + 4 * self.grids.len() + 4 * self.labels.len());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&(header_bytes.len() as u32).to_le_bytes());
        out.extend_from_slice(&header_bytes);
        for v in &self.grids {
            out.extend_from_slice(&v.to_le_bytes());
        }
        for y in &self.labels {
            out.extend_from_slice(&y.to_le_bytes());
        }
        Ok(out)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.to_bytes()?)?;
        Ok(())
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 10 || &bytes[0..4] != MAGIC {
            return Err(Error::Format("not an LNSA archive".into()));
        }
        let version = u16::from_le_bytes([bytes[4], bytes[5]]);
        if version != VERSION {
            return Err(Error::Format(format!("unsupported archive version {version}")));
        }
        let header_len = u32::from_le_bytes([bytes[6], bytes[7], bytes[8], bytes[9]]) as usize;
        let header_end = 10 + header_len;
        if bytes.len() < header_end {
            return Err(Error::Format("truncated archive header".into()));
        }
        let header: ArchiveHeader = serde_json::from_slice(&bytes[10..header_end])
            .map_err(|e| Error::Format(format!("archive header is not valid JSON: {e}")))?;
        let n = header.num_samples as usize;
        let plane = header.geometry.plane();
        let expected = 4 * n * plane + 4 * n;
        let payload = &bytes[header_end..];
        if payload.len() != expected {
            return Err(Error::Format(format!("archive payload is {} bytes, expected {expected}", payload.len())));
        }
        let mut grids = Vec::with_capacity(n * plane);
        for i in 0..n * plane {
            let at = 4 * i;
            grids.push(f32::from_le_bytes([payload[at], payload[at + 1], payload[at + 2], payload[at + 3]]));
        }
        let labels_off = 4 * n * plane;
        let mut labels = Vec::with_capacity(n);
        for i in 0..n {
            let at = labels_off + 4 * i;
            labels.push(u32::from_le_bytes([payload[at], payload[at + 1], payload[at + 2], payload[at + 3]]));
        }
        let rebuilt = EncodedDataset::assemble(
            &header.dataset,
            header.geometry,
            &header.label_map.iter().map(String::as_str).collect::<Vec<_>>(),
            header.feature_dim,
            header.normalization.clone(),
            header.nslkdd_vocab.clone(),
            grids,
            labels,
            header.split.train_fraction,
            header.split.seed,
        )?;
        if rebuilt.header.split != header.split || rebuilt.header.class_counts != header.class_counts {
            return Err(Error::Format("archive header counts disagree with recomputed split".into()));
        }
        Ok(rebuilt)
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_bytes(&fs::read(path)?)
    }
}

/// Expected-vs-actual class totals against the published corpus composition.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReferenceComparison {
    pub source: String,
    pub class_names: Vec<String>,
    pub expected: Vec<u64>,
    pub actual: Vec<u64>,
    pub deviation: Vec<i64>,
    pub expected_total: u64,
    pub actual_total: u64,
}

impl ReferenceComparison {
    fn new(source: &str, class_names: &[&str], expected: &[u64], actual: &[u64]) -> Self {
        ReferenceComparison {
            source: source.to_string(),
            class_names: class_names.iter().map(|s| s.to_string()).collect(),
            expected: expected.to_vec(),
            actual: actual.to_vec(),
            deviation: expected.iter().zip(actual).map(|(e, a)| *a as i64 - *e as i64).collect(),
            expected_total: expected.iter().sum(),
            actual_total: actual.iter().sum(),
        }
    }

    pub fn matches(&self) -> bool {
        self.deviation.iter().all(|&d| d == 0)
    }
}

/// Machine-readable ingestion summary written next to every archive.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IngestReport {
    pub dataset: String,
    pub files: Vec<String>,
    pub rows_read: u64,
    pub encoded_samples: u64,
    pub class_names: Vec<String>,
    pub class_counts: Vec<u64>,
    pub dropped_nonfinite_rows: u64,
    pub excluded_labels: BTreeMap<String, u64>,
    pub unseen_categorical_groups: u64,
    pub reference: Option<ReferenceComparison>,
    pub feature_dim: usize,
    pub geometry: Geometry,
    pub split: SplitSpec,
}

/// Knobs shared by both ingestion drivers.
#[derive(Debug, Clone, Copy)]
pub struct IngestOptions {
    pub train_fraction: f64,
    pub seed: u64,
    pub nan_policy: NanPolicy,
}

impl Default for IngestOptions {
    fn default() -> Self {
        IngestOptions { train_fraction: 0.8, seed: 42, nan_policy: NanPolicy::Drop }
    }
}

/// Full NSL-KDD ingestion: parse, map labels, split, fit bounds on the train
/// split, one-hot encode, and assemble the archive plus its report.
pub fn ingest_nslkdd(paths: &[impl AsRef<Path>], opts: &IngestOptions) -> Result<(EncodedDataset, IngestReport)> {
    let (records, summary) = parse_nslkdd(paths)?;
    if records.is_empty() {
        return Err(Error::invalid("ingest", "no records parsed"));
    }
    let labels: Vec<u32> = records.iter().map(|r| r.class as u32).collect();
    let (train_ids, _) = stratified_split(&labels, NSLKDD_CLASSES.len(), opts.train_fraction, opts.seed)?;
    let vocab = NslkddVocab::fit(&records);
    let bounds = Bounds::fit(train_ids.iter().map(|&i| records[i as usize].numeric.as_slice()), crate::data::nslkdd::NUM_NUMERIC)?;
    let dim = vocab.encoded_dim();
    let side = grid_side(dim);
    let mut grids = Vec::with_capacity(records.len() * side * side);
    let mut unseen_total = 0u64;
    for r in &records {
        let (grid, unseen) = encode_nslkdd(r, &vocab, &bounds, side)?;
        unseen_total += unseen;
        grids.extend_from_slice(&grid);
    }
    let geometry = Geometry { channels: 1, height: side, width: side };
    let ds = EncodedDataset::assemble(
        "nslkdd",
        geometry,
        &NSLKDD_CLASSES,
        dim,
        Some(bounds),
        Some(vocab),
        grids,
        labels,
        opts.train_fraction,
        opts.seed,
    )?;
    let report = IngestReport {
        dataset: "nslkdd".into(),
        files: paths.iter().map(|p| p.as_ref().display().to_string()).collect(),
        rows_read: summary.total,
        encoded_samples: ds.num_samples() as u64,
        class_names: summary.class_names.clone(),
        class_counts: summary.class_counts.clone(),
        dropped_nonfinite_rows: 0,
        excluded_labels: BTreeMap::new(),
        unseen_categorical_groups: unseen_total,
        reference: Some(ReferenceComparison::new(
            "merged official KDDTrain+/KDDTest+ totals",
            &NSLKDD_CLASSES,
            &NSLKDD_REFERENCE_COUNTS,
            &summary.class_counts,
        )),
        feature_dim: dim,
        geometry,
        split: ds.header().split.clone(),
    };
    Ok((ds, report))
}

/// Full CICIDS2017 ingestion. The files are streamed three times to stay
/// desk-scale on the 2.4M-row corpus: labels+counts, train-split bounds,
/// then encoding.
pub fn ingest_cicids(paths: &[impl AsRef<Path>], opts: &IngestOptions) -> Result<(EncodedDataset, IngestReport)> {
    let mut labels: Vec<u32> = Vec::new();
    let stats = for_each_cicids_row(paths, opts.nan_policy, |_, class| {
        labels.push(class as u32);
        Ok(())
    })?;
    if labels.is_empty() {
        return Err(Error::invalid("ingest", "no usable rows parsed"));
    }
    let dim = stats.feature_dim;
    let (train_ids, _) = stratified_split(&labels, CICIDS_CLASSES.len(), opts.train_fraction, opts.seed)?;
    let mut in_train = vec![false; labels.len()];
    for &i in &train_ids {
        in_train[i as usize] = true;
    }

    let mut mins = vec![f64::INFINITY; dim];
    let mut maxs = vec![f64::NEG_INFINITY; dim];
    let mut row = 0usize;
    for_each_cicids_row(paths, opts.nan_policy, |features, _| {
        if in_train[row] {
            for (i, v) in features.iter().enumerate() {
                if *v < mins[i] {
                    mins[i] = *v;
                }
                if *v > maxs[i] {
                    maxs[i] = *v;
                }
            }
        }
        row += 1;
        Ok(())
    })?;
    let bounds = Bounds { mins, maxs };

    let side = grid_side(dim);
    let mut grids: Vec<f32> = Vec::with_capacity(labels.len() * side * side);
    for_each_cicids_row(paths, opts.nan_policy, |features, _| {
        grids.extend_from_slice(&encode_numeric(features, &bounds, side)?);
        Ok(())
    })?;

    let geometry = Geometry { channels: 1, height: side, width: side };
    let ds = EncodedDataset::assemble(
        "cicids2017",
        geometry,
        &CICIDS_CLASSES,
        dim,
        Some(bounds),
        None,
        grids,
        labels,
        opts.train_fraction,
        opts.seed,
    )?;
    let report = IngestReport {
        dataset: "cicids2017".into(),
        files: paths.iter().map(|p| p.as_ref().display().to_string()).collect(),
        rows_read: stats.rows_read,
        encoded_samples: ds.num_samples() as u64,
        class_names: CICIDS_CLASSES.iter().map(|s| s.to_string()).collect(),
        class_counts: stats.class_counts.clone(),
        dropped_nonfinite_rows: stats.dropped_nonfinite,
        excluded_labels: stats.excluded_labels.clone(),
        unseen_categorical_groups: 0,
        reference: Some(ReferenceComparison::new(
            "published 6-class corpus totals",
            &CICIDS_CLASSES,
            &CICIDS_REFERENCE_COUNTS,
            &stats.class_counts,
        )),
        feature_dim: dim,
        geometry,
        split: ds.header().split.clone(),
    };
    Ok((ds, report))
}

/// Keeps a per-class fraction of the samples (stratified, seeded), returning
/// a new dataset re-split with the same recipe. Used for subsampled runs.
pub fn subsample(ds: &EncodedDataset, fraction: f64, seed: u64) -> Result<EncodedDataset> {
    let (keep, _) = stratified_split(ds.labels(), ds.num_classes(), fraction, seed)?;
    let plane = ds.geometry().plane();
    let mut grids = Vec::with_capacity(keep.len() * plane);
    let mut labels = Vec::with_capacity(keep.len());
    for &i in &keep {
        let start = i as usize * plane;
        grids.extend_from_slice(&ds.grids[start..start + plane]);
        labels.push(ds.labels[i as usize]);
    }
    EncodedDataset::assemble(
        &ds.header.dataset,
        ds.geometry(),
        &ds.header.label_map.iter().map(String::as_str).collect::<Vec<_>>(),
        ds.header.feature_dim,
        ds.header.normalization.clone(),
        ds.header.nslkdd_vocab.clone(),
        grids,
        labels,
        ds.header.split.train_fraction,
        ds.header.split.seed,
    )
}
