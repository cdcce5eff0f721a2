//! Momentum SGD with decoupled-from-nothing classic weight decay, plus the
//! cosine learning-rate schedule.

use crate::error::{Error, Result};
use crate::nn::ParameterStore;
use crate::scalar::Real;

/// Per-parameter velocity buffers, aligned with the store order.
#[derive(Debug, Clone)]
pub struct OptimizerState<F: Real> {
    velocities: Vec<Vec<F>>,
}

impl<F: Real> OptimizerState<F> {
    /// Zero-initialized velocities matching the store's tensors.
    pub fn new(params: &ParameterStore<F>) -> Self {
        OptimizerState { velocities: params.tensors().iter().map(|t| vec![F::zero(); t.len()]).collect() }
    }

    pub fn velocities(&self) -> &[Vec<F>] {
        &self.velocities
    }
}

/// One update: `g' = grad + weight_decay·param; v ← momentum·v + g';
/// param ← param − lr·v`. Gradients are read from each tensor's grad buffer.
pub fn sgd_step<F: Real>(
    params: &mut ParameterStore<F>,
    state: &mut OptimizerState<F>,
    lr: F,
    momentum: F,
    weight_decay: F,
) -> Result<()> {
    if state.velocities.len() != params.len() {
        return Err(Error::shape("sgd_step", "optimizer state does not match parameter count"));
    }
    for (tensor, velocity) in params.tensors_mut().iter_mut().zip(&mut state.velocities) {
        if velocity.len() != tensor.len() {
            return Err(Error::shape("sgd_step", "velocity buffer does not match parameter shape"));
        }
        let grad = tensor
            .grad()
            .ok_or_else(|| Error::invalid("sgd_step", "parameter has no gradient buffer"))?
            .to_vec();
        let data = tensor.data_mut();
        for ((w, v), g) in data.iter_mut().zip(velocity.iter_mut()).zip(&grad) {
            let g = *g + weight_decay * *w;
            *v = momentum * *v + g;
            *w -= lr * *v;
        }
    }
    Ok(())
}

/// `lr(step) = 0.5·lr0·(1 + cos(π·step/total_steps))`, annealed to 0.
pub fn cosine_lr(step: usize, total_steps: usize, lr0: f64) -> Result<f64> {
    if total_steps == 0 {
        return Err(Error::invalid("cosine_lr", "total_steps must be > 0"));
    }
    if step > total_steps {
        return Err(Error::invalid("cosine_lr", format!("step {step} beyond total_steps {total_steps}")));
    }
    if lr0 <= 0.0 {
        return Err(Error::invalid("cosine_lr", format!("lr0 must be > 0, got {lr0}")));
    }
    Ok(0.5 * lr0 * (1.0 + (std::f64::consts::PI * step as f64 / total_steps as f64).cos()))
}
