//! Euclidean projection onto `{x ∈ [x_min, 1]ⁿ : Σ xᵢ ≤ V₀}`.

use crate::error::{Error, Result};
use crate::DenseVector;

/// Bisection stops once the bracket on `Σ xᵢ` is this tight.
pub const VOLUME_TOLERANCE: f64 = 1e-10;

fn shifted(x: &DenseVector, mu: f64, x_min: f64) -> DenseVector {
    x.map(|v| (v - mu).clamp(x_min, 1.0))
}

/// Nearest point of the box `[x_min, 1]ⁿ` cut by `Σ xᵢ ≤ V₀`.
///
/// The solution has the form `clamp(xᵢ - μ, x_min, 1)` with `μ ≥ 0`: `μ = 0`
/// when the clamped input already fits the budget, otherwise the shift at
/// which the budget binds, found by bisection. The returned point never
/// exceeds the budget.
pub fn project_volume(x: &DenseVector, volume: f64, x_min: f64) -> Result<DenseVector> {
    let n = x.len();
    if n == 0 {
        return Err(Error::InvalidDimension("empty density vector".into()));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("density vector"));
    }
    if !(0.0..1.0).contains(&x_min) {
        return Err(Error::param("x_min", format!("must lie in [0, 1), got {x_min}")));
    }
    if !(volume >= n as f64 * x_min) {
        return Err(Error::InvalidBudget { budget: volume, n, x_min });
    }
    let clamped = shifted(x, 0.0, x_min);
    if clamped.sum() <= volume {
        return Ok(clamped);
    }
    let (mut lo, mut hi) = (0.0, x.max() - x_min);
    let mut best = shifted(x, hi, x_min);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let y = shifted(x, mid, x_min);
        if y.sum() > volume {
            lo = mid;
        } else {
            hi = mid;
            best = y;
        }
        if volume - best.sum() <= VOLUME_TOLERANCE || hi - lo <= f64::EPSILON * hi.max(1.0) {
            break;
        }
    }
    Ok(best)
}
