//! Half-overlapping batch windows.
//!
//! Consecutive batches share their adjoining halves: `B_t` starts at offset
//! `t·n/2`, so the last `n/2` ids of `B_{t−1}` are the first `n/2` ids of
//! `B_t`. That pairing is what lets the previous iteration's soft predictions
//! serve as distillation targets for the same samples.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// One epoch's ordered sample sequence plus the windowing rule.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BatchSchedule {
    batch_size: usize,
    order: Vec<u32>,
}

impl BatchSchedule {
    /// Windows an explicit order (no shuffling).
    pub fn new(order: Vec<u32>, batch_size: usize) -> Result<Self> {
        if batch_size < 2 || batch_size % 2 != 0 {
            return Err(Error::invalid("overlap_batches", format!("batch size must be even and >= 2, got {batch_size}")));
        }
        if order.is_empty() {
            return Err(Error::invalid("overlap_batches", "empty id sequence"));
        }
        Ok(BatchSchedule { batch_size, order })
    }

    pub fn batch_size(&self) -> usize {
        self.batch_size
    }

    pub fn order(&self) -> &[u32] {
        &self.order
    }

    /// Number of windows this epoch. Sequences shorter than one batch form a
    /// single whole-sequence batch; otherwise windows advance by `n/2` while
    /// a full window fits (a shorter tail is dropped until the reshuffle).
    pub fn num_batches(&self) -> usize {
        if self.order.len() < self.batch_size {
            1
        } else {
            (self.order.len() - self.batch_size) / (self.batch_size / 2) + 1
        }
    }

    /// The ids of window `t`.
    pub fn batch(&self, t: usize) -> &[u32] {
        if self.order.len() < self.batch_size {
            &self.order
        } else {
            let start = t * self.batch_size / 2;
            &self.order[start..start + self.batch_size]
        }
    }

    pub fn batches(&self) -> impl Iterator<Item = &[u32]> {
        (0..self.num_batches()).map(|t| self.batch(t))
    }

    /// Size of the half shared with the previous window (0 for the first
    /// window and for whole-sequence batches).
    pub fn shared_prefix_len(&self, t: usize) -> usize {
        if t == 0 || self.order.len() < self.batch_size {
            0
        } else {
            self.batch_size / 2
        }
    }
}

/// Shuffles `ids` with an RNG derived from `(seed, epoch)` and windows the
/// result into half-overlapping batches.
pub fn overlap_batches(ids: &[u32], batch_size: usize, seed: u64, epoch: u64) -> Result<BatchSchedule> {
    let mut order = ids.to_vec();
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ epoch.wrapping_mul(0xA076_1D64_78BD_642F));
    order.shuffle(&mut rng);
    BatchSchedule::new(order, batch_size)
}
