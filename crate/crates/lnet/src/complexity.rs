//! Parameter and FLOPs accounting for any model configuration.
//!
//! Multiply-accumulates are the primary cost unit (1 MAC reported as 1 FLOP,
//! with the 2·MAC figure alongside); MFM and pooling contribute comparisons,
//! reported separately and excluded from the FLOPs totals. Bias adds are not
//! MACs and are excluded from the MAC counts.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::nn::{Layer, ModelConfig};

/// Per-layer cost row.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerCost {
    pub name: String,
    /// Trainable parameters including biases.
    pub params: u64,
    /// Trainable parameters with biases excluded (the C_i·(K²+C_o) view).
    pub params_no_bias: u64,
    pub macs: u64,
    pub comparisons: u64,
}

/// Whole-model cost table.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ComplexityReport {
    pub layers: Vec<LayerCost>,
    pub total_params: u64,
    pub total_params_no_bias: u64,
    /// Total multiply-accumulates; the primary FLOPs figure (1 MAC = 1 FLOP).
    pub total_macs: u64,
    /// The 2·MAC convention, reported alongside.
    pub total_flops_2x: u64,
    pub total_comparisons: u64,
}

impl ComplexityReport {
    fn from_rows(layers: Vec<LayerCost>) -> Self {
        let total_params = layers.iter().map(|l| l.params).sum();
        let total_params_no_bias = layers.iter().map(|l| l.params_no_bias).sum();
        let total_macs: u64 = layers.iter().map(|l| l.macs).sum();
        let total_comparisons = layers.iter().map(|l| l.comparisons).sum();
        ComplexityReport {
            layers,
            total_params,
            total_params_no_bias,
            total_macs,
            total_flops_2x: 2 * total_macs,
            total_comparisons,
        }
    }
}

fn layer_cost(layer: &Layer, include_bias: bool) -> Option<LayerCost> {
    let row = match layer {
        Layer::Depthwise { name, channels, kernel, out_hw, .. } => {
            let k2 = (kernel * kernel) as u64;
            let core = *channels as u64 * k2;
            LayerCost {
                name: name.clone(),
                params: core,
                params_no_bias: core,
                macs: core * (out_hw.0 * out_hw.1) as u64,
                comparisons: 0,
            }
        }
        Layer::Pointwise { name, c_in, c_out, hw } => {
            let core = (c_in * c_out) as u64;
            let bias = if include_bias { *c_out as u64 } else { 0 };
            LayerCost {
                name: name.clone(),
                params: core + bias,
                params_no_bias: core,
                macs: core * (hw.0 * hw.1) as u64,
                comparisons: 0,
            }
        }
        Layer::Standard { name, c_in, c_out, kernel, out_hw, .. } => {
            let core = (c_in * kernel * kernel * c_out) as u64;
            let bias = if include_bias { *c_out as u64 } else { 0 };
            LayerCost {
                name: name.clone(),
                params: core + bias,
                params_no_bias: core,
                macs: core * (out_hw.0 * out_hw.1) as u64,
                comparisons: 0,
            }
        }
        Layer::Mfm { name, c_in, hw } => LayerCost {
            name: name.clone(),
            params: 0,
            params_no_bias: 0,
            macs: 0,
            comparisons: (c_in / 2 * hw.0 * hw.1) as u64,
        },
        Layer::Pool { name, channels, in_hw } => LayerCost {
            name: name.clone(),
            params: 0,
            params_no_bias: 0,
            macs: 0,
            comparisons: (3 * channels * (in_hw.0 / 2) * (in_hw.1 / 2)) as u64,
        },
        Layer::Linear { name, d_in, d_out } => {
            let core = (d_in * d_out) as u64;
            let bias = if include_bias { *d_out as u64 } else { 0 };
            LayerCost { name: name.clone(), params: core + bias, params_no_bias: core, macs: core, comparisons: 0 }
        }
        Layer::Crop { .. } | Layer::Flatten { .. } => return None,
    };
    Some(row)
}

/// Exact parameter counts per layer. With `include_bias = false` the DSConv
/// block reduces to `C_i·(K² + C_o)` against the standard `C_i·K²·C_o`.
pub fn count_params(config: &ModelConfig, include_bias: bool) -> Result<ComplexityReport> {
    let plan = config.plan()?;
    Ok(ComplexityReport::from_rows(plan.iter().filter_map(|l| layer_cost(l, include_bias)).collect()))
}

/// Multiply-accumulate counts per layer at the config's input geometry,
/// with MFM/pooling comparisons tallied separately.
pub fn count_flops(config: &ModelConfig) -> Result<ComplexityReport> {
    count_params(config, true)
}
