//! Scalar abstraction for the tensor engine.
//!
//! Everything numeric in this crate is generic over [`Real`]: training runs
//! at `f32`, while the finite-difference oracles instantiate the same code at
//! `f64` for headroom.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, NumAssign, ToPrimitive};

/// Floating-point scalar usable inside tensors, tapes and losses.
pub trait Real:
    Float + NumAssign + FromPrimitive + ToPrimitive + Sum + Debug + Display + Default + Send + Sync + 'static
{
    /// Lossless-enough conversion from `f64` for constants and RNG draws.
    fn from_f64_c(v: f64) -> Self {
        Self::from_f64(v).expect("f64 constant not representable")
    }
}

impl Real for f32 {}
impl Real for f64 {}
