//! Seeded stratified train/test splitting.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Splits sample ids `0..labels.len()` per class: each class is shuffled with
/// a seed-derived RNG and `round(fraction·n_c)` ids go to train (within ±1 of
/// the exact fraction). Classes with fewer than 2 samples go wholly to train
/// with a warning. Both id lists come back sorted.
pub fn stratified_split(labels: &[u32], num_classes: usize, train_fraction: f64, seed: u64) -> Result<(Vec<u32>, Vec<u32>)> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::invalid("stratified_split", format!("fraction must be in (0,1), got {train_fraction}")));
    }
    let mut per_class: Vec<Vec<u32>> = vec![Vec::new(); num_classes];
    for (i, &y) in labels.iter().enumerate() {
        let slot = per_class.get_mut(y as usize).ok_or_else(|| {
            Error::invalid("stratified_split", format!("label {y} out of range for {num_classes} classes"))
        })?;
        slot.push(i as u32);
    }
    let mut train = Vec::new();
    let mut eval = Vec::new();
    for (c, ids) in per_class.iter_mut().enumerate() {
        if ids.is_empty() {
            continue;
        }
        if ids.len() < 2 {
            log::warn!("class {c} has {} sample(s); placing all in train", ids.len());
            train.extend_from_slice(ids);
            continue;
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (c as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
        ids.shuffle(&mut rng);
        let n_train = (train_fraction * ids.len() as f64).round() as usize;
        let n_train = n_train.clamp(1, ids.len());
        train.extend_from_slice(&ids[..n_train]);
        eval.extend_from_slice(&ids[n_train..]);
    }
    train.sort_unstable();
    eval.sort_unstable();
    Ok((train, eval))
}
