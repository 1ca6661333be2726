//! First-order steppers: plain, noisy, adaptive and subspace-projected descent.

use super::{OptimizerState, StepReport};
use crate::error::{Error, Result};
use crate::problem::ObjectiveProblem;
use crate::subspace::{sample_random_subspace, ProjectionMode, SubspaceBasis};
use crate::DenseVector;

/// How the adaptive accumulator `v_k` tracks the squared gradient norm.
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub enum AccumulatorRule {
    /// `v_k = ‖∇f(x_k)‖²`.
    #[default]
    Exact,
    /// `v_k = β v_{k-1} + (1-β) ‖∇f(x_k)‖²`, seeded with `‖∇f(x_0)‖²`.
    Ema { decay: f64 },
}

pub(crate) fn check_positive(name: &'static str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::param(name, format!("must be positive, got {v}")))
    }
}

/// Value and gradient at the current iterate, turning non-finite output into
/// a divergence error tagged with the iteration.
pub(crate) fn evaluate(problem: &ObjectiveProblem, state: &OptimizerState) -> Result<(f64, DenseVector)> {
    let diverged = |reason: String| Error::Diverged {
        iteration: state.k,
        reason,
    };
    if state.x.iter().any(|v| !v.is_finite()) {
        return Err(diverged("non-finite iterate".into()));
    }
    let g = match problem.gradient(&state.x) {
        Ok(g) => g,
        Err(Error::NonFinite(what)) => return Err(diverged(format!("non-finite {what}"))),
        Err(e) => return Err(e),
    };
    let f = problem.value(&state.x).unwrap_or(f64::NAN);
    Ok((f, g))
}

/// Installs `x_next`, bumping the iteration counter.
pub(crate) fn commit(state: &mut OptimizerState, x_next: &DenseVector) -> Result<()> {
    if x_next.iter().any(|v| !v.is_finite()) {
        return Err(Error::Diverged {
            iteration: state.k,
            reason: "non-finite iterate after step".into(),
        });
    }
    state.x.copy_from(x_next);
    state.k += 1;
    Ok(())
}

/// `x_{k+1} = x_k - η ∇f(x_k)`.
pub fn gd_step(problem: &ObjectiveProblem, state: &mut OptimizerState, eta: f64) -> Result<StepReport> {
    check_positive("eta", eta)?;
    let (f, g) = evaluate(problem, state)?;
    let x_next = &state.x - eta * &g;
    commit(state, &x_next)?;
    let mut report = StepReport::basic(state.k - 1, f, g.norm(), x_next);
    report.eta = Some(eta);
    Ok(report)
}

/// `x_{k+1} = x_k - η ∇f(x_k) + η ζ_k` with `ζ_k ~ N(0, σ² I)`.
///
/// With `sigma = 0` no random draws are consumed and the step equals
/// [`gd_step`].
pub fn noisy_gd_step(
    problem: &ObjectiveProblem,
    state: &mut OptimizerState,
    eta: f64,
    sigma: f64,
) -> Result<StepReport> {
    check_positive("eta", eta)?;
    if !(sigma >= 0.0) || !sigma.is_finite() {
        return Err(Error::param("sigma", format!("must be >= 0, got {sigma}")));
    }
    let (f, g) = evaluate(problem, state)?;
    let n = state.x.len();
    let zeta = if sigma > 0.0 {
        state.rng.gaussian_vector(n, sigma)?
    } else {
        DenseVector::zeros(n)
    };
    let x_next = &state.x - eta * &g + eta * &zeta;
    commit(state, &x_next)?;
    let mut report = StepReport::basic(state.k - 1, f, g.norm(), x_next);
    report.eta = Some(eta);
    report.noise = Some(zeta);
    Ok(report)
}

/// Gradient step with `η_k = α / (√v_k + ε)` and `v_k = ‖∇f(x_k)‖²`.
pub fn adaptive_step(
    problem: &ObjectiveProblem,
    state: &mut OptimizerState,
    alpha: f64,
    epsilon: f64,
) -> Result<StepReport> {
    adaptive_step_with(problem, state, alpha, epsilon, AccumulatorRule::Exact)
}

/// [`adaptive_step`] with a selectable accumulator rule.
pub fn adaptive_step_with(
    problem: &ObjectiveProblem,
    state: &mut OptimizerState,
    alpha: f64,
    epsilon: f64,
    rule: AccumulatorRule,
) -> Result<StepReport> {
    check_positive("alpha", alpha)?;
    check_positive("epsilon", epsilon)?;
    let (f, g) = evaluate(problem, state)?;
    let sq = g.norm_squared();
    state.v = match rule {
        AccumulatorRule::Exact => sq,
        AccumulatorRule::Ema { decay } => {
            if !(0.0..1.0).contains(&decay) {
                return Err(Error::param("ema_decay", format!("must lie in [0, 1), got {decay}")));
            }
            if state.k == 0 {
                sq
            } else {
                decay * state.v + (1.0 - decay) * sq
            }
        }
    };
    let eta = alpha / (state.v.sqrt() + epsilon);
    let x_next = &state.x - eta * &g;
    commit(state, &x_next)?;
    let mut report = StepReport::basic(state.k - 1, f, g.norm(), x_next);
    report.eta = Some(eta);
    Ok(report)
}

/// Applies the projected step `-η P ∇f` under the basis's projection mode.
pub(crate) fn projected_update(x: &DenseVector, step: &DenseVector, basis: &SubspaceBasis) -> Result<DenseVector> {
    match basis.mode() {
        ProjectionMode::Displacement => Ok(x + basis.project(step)?),
        ProjectionMode::Iterate => basis.project(&(x + step)),
    }
}

/// `x_{k+1} = x_k - η P_S ∇f(x_k)`, recording `‖P_S g‖² / ‖g‖²`.
pub fn subspace_step(
    problem: &ObjectiveProblem,
    state: &mut OptimizerState,
    eta: f64,
    basis: &SubspaceBasis,
) -> Result<StepReport> {
    check_positive("eta", eta)?;
    if basis.ambient_dim() != state.x.len() {
        return Err(Error::DimensionMismatch {
            expected: state.x.len(),
            actual: basis.ambient_dim(),
        });
    }
    let (f, g) = evaluate(problem, state)?;
    let ratio = basis.preservation_ratio(&g).ok();
    let x_next = projected_update(&state.x, &(-eta * &g), basis)?;
    commit(state, &x_next)?;
    let mut report = StepReport::basic(state.k - 1, f, g.norm(), x_next);
    report.eta = Some(eta);
    report.preservation_ratio = ratio;
    Ok(report)
}

/// [`subspace_step`] on a fresh uniformly random `m`-dimensional subspace
/// drawn from the state's stream.
pub fn random_subspace_step(
    problem: &ObjectiveProblem,
    state: &mut OptimizerState,
    eta: f64,
    m: usize,
) -> Result<StepReport> {
    let basis = sample_random_subspace(&mut state.rng, state.x.len(), m)?;
    subspace_step(problem, state, eta, &basis)
}
