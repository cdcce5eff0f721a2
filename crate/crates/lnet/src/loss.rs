//! Loss functions: temperature softmax, class-balanced cross-entropy, the
//! batch-wise self-distillation KL term, and their weighted total.
//!
//! The pure functions here are the reference surface; the recorded
//! counterparts used in training live on [`Tape`](crate::tensor::tape::Tape)
//! (`cb_ce_batch`, `skd_kl_batch`, `add_scaled`) and share the same math.

use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::tensor::tape::{log_softmax, softmax};
use crate::tensor::Tensor;

/// Per-class re-weighting table: `w_y = (1−β)/(1−β^{n_y})`.
///
/// `β = 0` degenerates to plain cross-entropy (all weights 1); weights are
/// monotonically non-increasing in the class count.
#[derive(Debug, Clone)]
pub struct ClassBalanceTable<F: Real> {
    beta: f64,
    counts: Vec<u64>,
    weights: Vec<F>,
}

impl<F: Real> ClassBalanceTable<F> {
    /// Builds the table from per-class sample counts.
    pub fn new(beta: f64, counts: &[u64]) -> Result<Self> {
        if counts.is_empty() {
            return Err(Error::invalid("class_balance_table", "no classes"));
        }
        let weights = counts
            .iter()
            .map(|&n| cb_weight(beta, n).map(F::from_f64_c))
            .collect::<Result<Vec<_>>>()?;
        Ok(ClassBalanceTable { beta, counts: counts.to_vec(), weights })
    }

    /// Uniform weights (plain CE), for SKD-only or unweighted runs.
    pub fn uniform(num_classes: usize) -> Self {
        ClassBalanceTable { beta: 0.0, counts: vec![1; num_classes], weights: vec![F::one(); num_classes] }
    }

    /// As [`ClassBalanceTable::new`] but with weights rescaled to sum to the
    /// class count (`w ← w·M/Σw`). Keeps the loss at plain-CE scale while
    /// preserving the relative tail-class emphasis; weights may exceed 1.
    pub fn new_normalized(beta: f64, counts: &[u64]) -> Result<Self> {
        let raw = Self::new(beta, counts)?;
        let total: f64 = raw.weights.iter().map(|w| w.to_f64().expect("weight fits f64")).sum();
        let scale = raw.weights.len() as f64 / total;
        let weights = raw
            .weights
            .iter()
            .map(|w| F::from_f64_c(w.to_f64().expect("weight fits f64") * scale))
            .collect();
        Ok(ClassBalanceTable { beta, counts: counts.to_vec(), weights })
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn num_classes(&self) -> usize {
        self.weights.len()
    }

    pub fn weight(&self, class: usize) -> Result<F> {
        self.weights
            .get(class)
            .copied()
            .ok_or_else(|| Error::invalid("cb_weight", format!("class {class} not covered by table of {} classes", self.weights.len())))
    }

    pub fn weights(&self) -> &[F] {
        &self.weights
    }
}

/// The Eq.-4 coefficient `(1−β)/(1−β^{n_y})`, computed in double precision.
pub fn cb_weight(beta: f64, n_y: u64) -> Result<f64> {
    if !(0.0..1.0).contains(&beta) {
        return Err(Error::invalid("cb_weight", format!("beta must be in [0,1), got {beta}")));
    }
    if n_y == 0 {
        return Err(Error::invalid("cb_weight", "class count must be >= 1"));
    }
    if beta == 0.0 {
        return Ok(1.0);
    }
    // β^n via exp(n·ln β) keeps huge n from looping; underflow to 0 gives w → 1−β.
    let beta_pow = (n_y as f64 * beta.ln()).exp();
    Ok((1.0 - beta) / (1.0 - beta_pow))
}

/// Softened class distribution `p_i = exp(z_i/τ) / Σ_j exp(z_j/τ)`.
#[derive(Debug, Clone)]
pub struct SoftPrediction<F: Real> {
    probabilities: Tensor<F>,
    tau: F,
}

impl<F: Real> SoftPrediction<F> {
    /// Validates a prefabricated distribution (non-negative, sums to 1
    /// within 1e-6).
    pub fn new(probabilities: Tensor<F>, tau: F) -> Result<Self> {
        if tau <= F::zero() {
            return Err(Error::invalid("soft_prediction", format!("tau must be > 0, got {tau}")));
        }
        if probabilities.data().iter().any(|p| *p < F::zero()) {
            return Err(Error::invalid("soft_prediction", "negative probability entry"));
        }
        let total: F = probabilities.data().iter().copied().sum();
        if (total - F::one()).abs() > F::from_f64_c(1e-6) {
            return Err(Error::invalid("soft_prediction", format!("probabilities sum to {total}, expected 1")));
        }
        Ok(SoftPrediction { probabilities, tau })
    }

    pub fn probabilities(&self) -> &Tensor<F> {
        &self.probabilities
    }

    pub fn tau(&self) -> F {
        self.tau
    }
}

/// Eq. 3: temperature-softened softmax with max subtraction.
pub fn temperature_softmax<F: Real>(z: &Tensor<F>, tau: F) -> Result<SoftPrediction<F>> {
    if tau <= F::zero() {
        return Err(Error::invalid("temperature_softmax", format!("tau must be > 0, got {tau}")));
    }
    z.check_finite("temperature_softmax input")?;
    let probs = softmax(z.data(), tau);
    let probabilities = Tensor::new(z.shape().to_vec(), probs)?;
    Ok(SoftPrediction { probabilities, tau })
}

/// Eq. 4 for one sample: `w_y · (−log softmax_τ(z)_y)`.
pub fn cb_ce_loss<F: Real>(z: &Tensor<F>, y: usize, table: &ClassBalanceTable<F>, tau: F) -> Result<F> {
    if tau <= F::zero() {
        return Err(Error::invalid("cb_ce_loss", format!("tau must be > 0, got {tau}")));
    }
    let m = match z.shape() {
        [m] => *m,
        s => return Err(Error::shape("cb_ce_loss", format!("logits must be rank 1 [M], got {s:?}"))),
    };
    if y >= m {
        return Err(Error::invalid("cb_ce_loss", format!("class {y} out of range for {m} classes")));
    }
    let w = table.weight(y)?;
    let lp = log_softmax(z.data(), tau);
    Ok(w * -lp[y])
}

/// Eq. 4 averaged over a batch.
pub fn cb_ce_loss_batch<F: Real>(
    logits: &[Tensor<F>],
    labels: &[usize],
    table: &ClassBalanceTable<F>,
    tau: F,
) -> Result<F> {
    if logits.is_empty() || logits.len() != labels.len() {
        return Err(Error::invalid(
            "cb_ce_loss_batch",
            format!("lists must be non-empty and equal length: {} logits, {} labels", logits.len(), labels.len()),
        ));
    }
    let mut total = F::zero();
    for (z, &y) in logits.iter().zip(labels) {
        total += cb_ce_loss(z, y, table, tau)?;
    }
    Ok(total / F::from_f64_c(logits.len() as f64))
}

/// Eq. 5: `(1/n) Σ_i τ²·KL(prev_i ‖ softmax_τ(cur_i))` with natural-log KL.
///
/// `prev` entries are constants; teacher terms with probability 0 contribute
/// nothing.
pub fn skd_kl_loss<F: Real>(prev: &[SoftPrediction<F>], cur_logits: &[Tensor<F>], tau: F) -> Result<F> {
    if tau <= F::zero() {
        return Err(Error::invalid("skd_kl_loss", format!("tau must be > 0, got {tau}")));
    }
    if prev.is_empty() || prev.len() != cur_logits.len() {
        return Err(Error::invalid(
            "skd_kl_loss",
            format!("lists must be non-empty and equal length: {} teachers, {} logits", prev.len(), cur_logits.len()),
        ));
    }
    let tau2 = tau * tau;
    let mut total = F::zero();
    for (q, z) in prev.iter().zip(cur_logits) {
        if q.probabilities().shape() != z.shape() {
            return Err(Error::shape(
                "skd_kl_loss",
                format!("teacher shape {:?} vs logits shape {:?}", q.probabilities().shape(), z.shape()),
            ));
        }
        let lp = log_softmax(z.data(), tau);
        let mut kl = F::zero();
        for (qj, lpj) in q.probabilities().data().iter().zip(&lp) {
            if *qj > F::zero() {
                kl += *qj * (qj.ln() - *lpj);
            }
        }
        // KL is non-negative; roundoff on identical distributions can land
        // a hair below zero.
        total += tau2 * kl.max(F::zero());
    }
    Ok(total / F::from_f64_c(prev.len() as f64))
}

/// Eq. 6: `L = L_CB + λ·L_SKD`.
pub fn total_loss<F: Real>(cb: F, skd: F, lambda: F) -> Result<F> {
    if lambda < F::zero() {
        return Err(Error::invalid("total_loss", format!("lambda must be >= 0, got {lambda}")));
    }
    Ok(cb + lambda * skd)
}
