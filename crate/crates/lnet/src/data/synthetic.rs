//! Seeded synthetic datasets for smoke tests and determinism checks.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::data::archive::{EncodedDataset, Geometry};
use crate::error::Result;

/// Builds a grid dataset with one noisy template per class. Sample `i` has
/// class `i % num_classes`; each class template is drawn once from the seed
/// and samples add uniform noise of the given amplitude, clamped to `[0,1]`.
pub fn synthetic_dataset(
    num_classes: usize,
    total_samples: usize,
    side: usize,
    noise: f64,
    train_fraction: f64,
    seed: u64,
) -> Result<EncodedDataset> {
    let plane = side * side;
    let mut templates = Vec::with_capacity(num_classes);
    for c in 0..num_classes {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (c as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
        let template: Vec<f64> = (0..plane).map(|_| rng.gen_range(0.15..0.85)).collect();
        templates.push(template);
    }
    let n = total_samples;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut grids = Vec::with_capacity(n * plane);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let class = i % num_classes;
        labels.push(class as u32);
        for &base in &templates[class] {
            let v = (base + rng.gen_range(-noise..=noise)).clamp(0.0, 1.0);
            grids.push(v as f32);
        }
    }
    let class_names: Vec<String> = (0..num_classes).map(|c| format!("class{c}")).collect();
    EncodedDataset::assemble(
        "synthetic",
        Geometry { channels: 1, height: side, width: side },
        &class_names.iter().map(String::as_str).collect::<Vec<_>>(),
        plane,
        None,
        None,
        grids,
        labels,
        train_fraction,
        seed,
    )
}
