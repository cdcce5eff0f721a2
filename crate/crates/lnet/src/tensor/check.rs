//! Central finite-difference gradient checking.

use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::tensor::Tensor;

/// Compares an analytic gradient against central finite differences of `f`
/// at `x` and returns the maximum relative error over coordinates:
/// `|analytic − numeric| / max(|analytic|, |numeric|, 1e-8)`.
///
/// `f` must be deterministic. The estimate is unreliable at non-differentiable
/// points (max ties, pooling kinks): a window smaller than `epsilon` around a
/// kink makes the central difference straddle two linear pieces, so suites
/// sample away from ties.
pub fn finite_difference_check<F: Real>(
    mut f: impl FnMut(&Tensor<F>) -> Result<F>,
    x: &Tensor<F>,
    analytic: &[F],
    epsilon: F,
) -> Result<F> {
    if epsilon <= F::zero() {
        return Err(Error::invalid("finite_difference_check", format!("epsilon must be > 0, got {epsilon}")));
    }
    if analytic.len() != x.len() {
        return Err(Error::shape(
            "finite_difference_check",
            format!("analytic gradient has {} entries, x has {}", analytic.len(), x.len()),
        ));
    }
    let floor = F::from_f64_c(1e-8);
    let two = F::from_f64_c(2.0);
    let mut probe = x.clone();
    let mut max_err = F::zero();
    for i in 0..x.len() {
        let orig = x.data()[i];
        probe.data_mut()[i] = orig + epsilon;
        let plus = f(&probe)?;
        probe.data_mut()[i] = orig - epsilon;
        let minus = f(&probe)?;
        probe.data_mut()[i] = orig;
        if !plus.is_finite() || !minus.is_finite() {
            return Err(Error::NonFinite(format!("finite_difference_check probe at coordinate {i}")));
        }
        let numeric = (plus - minus) / (two * epsilon);
        let denom = analytic[i].abs().max(numeric.abs()).max(floor);
        let err = (analytic[i] - numeric).abs() / denom;
        if err > max_err {
            max_err = err;
        }
    }
    Ok(max_err)
}
