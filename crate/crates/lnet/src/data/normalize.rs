//! Per-feature min-max scaling fitted on the training split only.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Per-feature `[min, max]` bounds. Applying maps into `[0,1]` with
/// out-of-range values clamped; constant features map to 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    pub mins: Vec<f64>,
    pub maxs: Vec<f64>,
}

impl Bounds {
    /// Fits bounds over the given rows (training split only).
    pub fn fit<'a>(rows: impl IntoIterator<Item = &'a [f64]>, dim: usize) -> Result<Bounds> {
        let mut mins = vec![f64::INFINITY; dim];
        let mut maxs = vec![f64::NEG_INFINITY; dim];
        let mut seen = 0usize;
        for row in rows {
            if row.len() != dim {
                return Err(Error::shape("fit_normalizer", format!("row has {} features, expected {dim}", row.len())));
            }
            for (i, v) in row.iter().enumerate() {
                if *v < mins[i] {
                    mins[i] = *v;
                }
                if *v > maxs[i] {
                    maxs[i] = *v;
                }
            }
            seen += 1;
        }
        if seen == 0 {
            return Err(Error::invalid("fit_normalizer", "no training rows to fit bounds on"));
        }
        Ok(Bounds { mins, maxs })
    }

    pub fn dim(&self) -> usize {
        self.mins.len()
    }

    /// Scales one row into `[0,1]^dim`.
    pub fn apply(&self, features: &[f64]) -> Result<Vec<f64>> {
        if self.mins.is_empty() {
            return Err(Error::invalid("apply_normalizer", "bounds were never fitted"));
        }
        if features.len() != self.dim() {
            return Err(Error::shape(
                "apply_normalizer",
                format!("row has {} features, bounds cover {}", features.len(), self.dim()),
            ));
        }
        Ok(features
            .iter()
            .enumerate()
            .map(|(i, v)| {
                let range = self.maxs[i] - self.mins[i];
                if range <= 0.0 {
                    0.0
                } else {
                    ((v - self.mins[i]) / range).clamp(0.0, 1.0)
                }
            })
            .collect())
    }
}
