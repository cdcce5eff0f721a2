//! Desk-scale training and evaluation toolkit for the LNet family of
//! lightweight intrusion-detection models.
//!
//! The crate covers five layers:
//!
//! - [`tensor`] — a minimal dense-tensor engine with reverse-mode
//!   differentiation over exactly the operator set the models need;
//! - [`nn`] — the DeepMax block (depthwise-separable convolution →
//!   Max-Feature-Map → pooling) and the model variants built from it;
//! - [`loss`] — temperature softmax, class-balanced cross-entropy, the
//!   batch-wise self-distillation KL term and their weighted total;
//! - [`data`] — NSL-KDD / CICIDS2017 ingestion, grid encoding and the
//!   half-overlapping batch schedule self-distillation relies on;
//! - [`train`] / [`metrics`] / [`complexity`] — the SGD training loop,
//!   evaluation metrics and parameter/FLOPs accounting.
//!
//! All numeric code is generic over [`scalar::Real`]; training runs at `f32`
//! and the gradient-checking oracles instantiate the same code at `f64`.

pub mod complexity;
pub mod data;
pub mod error;
pub mod loss;
pub mod metrics;
pub mod nn;
pub mod scalar;
pub mod tensor;
pub mod train;

pub use error::{Error, Result};
pub use scalar::Real;
pub use tensor::Tensor;

/// Single-precision tensor, the training default.
pub type Tensor32 = Tensor<f32>;
/// Double-precision tensor, used by the finite-difference oracles.
pub type Tensor64 = Tensor<f64>;
/// Single-precision tape.
pub type Tape32 = tensor::tape::Tape<f32>;
/// Double-precision tape.
pub type Tape64 = tensor::tape::Tape<f64>;
/// Single-precision model.
pub type Model32 = nn::Model<f32>;
/// Double-precision model.
pub type Model64 = nn::Model<f64>;
