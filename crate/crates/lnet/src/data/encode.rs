//! Feature-vector → grid encoding.
//!
//! Encoded vectors are zero-padded to the smallest square that holds them
//! and reshaped row-major to `1×side×side`. All values live in `[0,1]`;
//! padding cells are exactly 0.

use crate::data::normalize::Bounds;
use crate::data::nslkdd::{NslkddRecord, NslkddVocab};
use crate::error::Result;
use crate::tensor::Tensor;

/// Preprocessed sample: grid plus class label.
#[derive(Debug, Clone)]
pub struct EncodedSample {
    pub id: u32,
    pub grid: Tensor<f32>,
    pub label: usize,
}

/// Side of the smallest square grid holding `dim` values.
pub fn grid_side(dim: usize) -> usize {
    let mut side = (dim as f64).sqrt().floor() as usize;
    while side * side < dim {
        side += 1;
    }
    side
}

/// Pads a normalized feature vector to `side²` and converts to f32.
pub fn pad_to_grid(features: &[f64], side: usize) -> Vec<f32> {
    let mut grid = vec![0.0f32; side * side];
    for (g, v) in grid.iter_mut().zip(features) {
        *g = *v as f32;
    }
    grid
}

/// Encodes an NSL-KDD record: one-hot categorical blocks (protocol, service,
/// flag, each in sorted-vocabulary order) followed by the 38 normalized
/// numeric features. Returns the flat grid and the number of one-hot groups
/// whose value was unseen at fit time (those groups stay all-zero).
pub fn encode_nslkdd(record: &NslkddRecord, vocab: &NslkddVocab, bounds: &Bounds, side: usize) -> Result<(Vec<f32>, u64)> {
    let dim = vocab.encoded_dim();
    let mut features = vec![0.0f64; dim];
    let mut unseen = 0u64;
    let mut offset = 0usize;
    for (value, values) in [
        (&record.protocol, &vocab.protocols),
        (&record.service, &vocab.services),
        (&record.flag, &vocab.flags),
    ] {
        match values.binary_search(value) {
            Ok(i) => features[offset + i] = 1.0,
            Err(_) => unseen += 1,
        }
        offset += values.len();
    }
    let normalized = bounds.apply(&record.numeric)?;
    features[offset..offset + normalized.len()].copy_from_slice(&normalized);
    Ok((pad_to_grid(&features, side), unseen))
}

/// Encodes a numeric-only record (CICIDS2017).
pub fn encode_numeric(features: &[f64], bounds: &Bounds, side: usize) -> Result<Vec<f32>> {
    let normalized = bounds.apply(features)?;
    Ok(pad_to_grid(&normalized, side))
}
