//! Steppers that act through the Hessian eigenbasis.

use super::steps::{check_positive, commit, evaluate};
use super::{OptimizerState, StepReport};
use crate::error::{Error, Result};
use crate::problem::ObjectiveProblem;
use crate::spectral::{eigh, filter_gradient, filter_weight, regularizer, shaping_operator, SpectralDecomposition};
use crate::DenseVector;

fn hessian_decomposition(problem: &ObjectiveProblem, x: &DenseVector) -> Result<SpectralDecomposition> {
    if x.len() > crate::spectral::DENSE_EIG_LIMIT {
        return Err(Error::InvalidDimension(format!(
            "dimension {} exceeds the dense eigendecomposition limit {}",
            x.len(),
            crate::spectral::DENSE_EIG_LIMIT
        )));
    }
    eigh(&problem.hessian(x)?)
}

/// Hessian-filtered step `x - η_k Σ φ(λᵢ)⟨g, vᵢ⟩vᵢ` with `φ(λ) = 1/√(|λ| + ε)`
/// and `η_k = α / (‖g_filtered‖ + ε)`.
///
/// Reports `γ_eff = min_{λᵢ<0} φ(λᵢ)|λᵢ|` when the Hessian has a negative
/// eigenvalue.
pub fn filtered_step(
    problem: &ObjectiveProblem,
    state: &mut OptimizerState,
    alpha: f64,
    epsilon: f64,
) -> Result<StepReport> {
    check_positive("alpha", alpha)?;
    check_positive("epsilon", epsilon)?;
    let (f, g) = evaluate(problem, state)?;
    let decomp = hessian_decomposition(problem, &state.x)?;
    let g_filtered = filter_gradient(&decomp, &g, epsilon)?;
    let eta = alpha / (g_filtered.norm() + epsilon);
    let gamma_eff = decomp
        .eigenvalues()
        .iter()
        .filter(|&&l| l < 0.0)
        .map(|&l| filter_weight(l, epsilon) * l.abs())
        .reduce(f64::min);
    let x_next = &state.x - eta * g_filtered;
    commit(state, &x_next)?;
    let mut report = StepReport::basic(state.k - 1, f, g.norm(), x_next);
    report.eta = Some(eta);
    report.gamma_eff = gamma_eff;
    Ok(report)
}

/// `x - η D ∇f` with the trace-one shaping operator `D` of exponent `p`.
pub fn shaped_step(problem: &ObjectiveProblem, state: &mut OptimizerState, eta: f64, p: f64) -> Result<StepReport> {
    check_positive("eta", eta)?;
    let (f, g) = evaluate(problem, state)?;
    let d = shaping_operator(&hessian_decomposition(problem, &state.x)?, p)?;
    let x_next = &state.x - eta * d.apply(&g)?;
    commit(state, &x_next)?;
    let mut report = StepReport::basic(state.k - 1, f, g.norm(), x_next);
    report.eta = Some(eta);
    Ok(report)
}

/// `x - η R ∇f` with the saturating regularizer `R`; reports `κ_eff` of `RH`.
pub fn regularized_step(
    problem: &ObjectiveProblem,
    state: &mut OptimizerState,
    eta: f64,
    p: f64,
    delta_reg: f64,
) -> Result<StepReport> {
    check_positive("eta", eta)?;
    let (f, g) = evaluate(problem, state)?;
    let r = regularizer(&hessian_decomposition(problem, &state.x)?, p, delta_reg)?;
    let x_next = &state.x - eta * r.apply(&g)?;
    commit(state, &x_next)?;
    let mut report = StepReport::basic(state.k - 1, f, g.norm(), x_next);
    report.eta = Some(eta);
    report.kappa_eff = r.effective_condition_number().ok();
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::objectives::{make_diagonal_quadratic, make_quadratic_saddle, QuadraticSaddleSpec};
    use crate::optimizers::{adaptive_step, gd_step};
    use crate::rng::RngStream;

    fn state(x: Vec<f64>) -> OptimizerState {
        OptimizerState::new(DenseVector::from_vec(x), 0, RngStream::new(0))
    }

    #[test]
    fn saddle_gamma_eff_is_one() {
        let p = make_quadratic_saddle(QuadraticSaddleSpec { n: 4, k: 1 }).unwrap();
        let mut s = state(vec![0.1, 0.2, 0.3, 0.4]);
        let r = filtered_step(&p, &mut s, 0.1, 1e-8).unwrap();
        assert!((r.gamma_eff.unwrap() - 1.0 / (1.0f64 + 1e-8).sqrt()).abs() < 1e-12);
        let q = make_diagonal_quadratic("q", vec![1.0, 2.0]).unwrap();
        let r = filtered_step(&q, &mut state(vec![1.0, 1.0]), 0.1, 1e-8).unwrap();
        assert_eq!(r.gamma_eff, None);
    }

    #[test]
    fn identity_hessian_reduces_to_adaptive() {
        let q = make_diagonal_quadratic("q", vec![1.0; 3]).unwrap();
        let mut a = state(vec![0.3, -0.1, 0.7]);
        let mut b = a.clone();
        for _ in 0..20 {
            adaptive_step(&q, &mut a, 0.1, 1e-8).unwrap();
            filtered_step(&q, &mut b, 0.1, 1e-8).unwrap();
        }
        assert!((a.x - b.x).norm() < 1e-10);
    }

    #[test]
    fn filtered_direction_on_mixed_spectrum() {
        // Gradient (1, 1) at x = (-1/9, 1) for f = ½(-9x₁² + x₂²).
        let q = make_diagonal_quadratic("q", vec![-9.0, 1.0]).unwrap();
        let mut s = state(vec![-1.0 / 9.0, 1.0]);
        let r = filtered_step(&q, &mut s, 0.1, 1e-12).unwrap();
        let d = (DenseVector::from_vec(vec![-1.0 / 9.0, 1.0]) - &r.x_next) / r.eta.unwrap();
        assert!((d[0] - 1.0 / 3.0).abs() < 1e-6 && (d[1] - 1.0).abs() < 1e-6);
    }

    #[test]
    fn shaped_modes_follow_recursion() {
        let q = make_diagonal_quadratic("q", vec![2.0, 1.0]).unwrap();
        let eta = 0.3;
        let mut s = state(vec![1.0, 1.0]);
        let mut beta = [1.0f64, 1.0];
        for _ in 0..40 {
            shaped_step(&q, &mut s, eta, 1.0).unwrap();
            beta[0] *= 1.0 - eta * (2.0 / 3.0) * 2.0;
            beta[1] *= 1.0 - eta * (1.0 / 3.0) * 1.0;
        }
        assert!((s.x[0] - beta[0]).abs() < 1e-12 && (s.x[1] - beta[1]).abs() < 1e-12);
    }

    #[test]
    fn regularized_step_kappa_and_limit() {
        let q = make_diagonal_quadratic("q", vec![1.0, 100.0]).unwrap();
        let r = regularized_step(&q, &mut state(vec![1.0, 1.0]), 0.001, 1.0, 1.0).unwrap();
        assert!((r.kappa_eff.unwrap() - 198.0198).abs() < 1e-3);

        let mut a = state(vec![1.0, -2.0]);
        let mut b = a.clone();
        gd_step(&q, &mut a, 0.005).unwrap();
        regularized_step(&q, &mut b, 0.005, 1.0, 1e-12).unwrap();
        assert!((a.x - b.x).norm() < 1e-10);
    }

    #[test]
    fn flat_directions_are_frozen_by_regularizer() {
        let q = make_diagonal_quadratic("q", vec![0.0, 2.0]).unwrap();
        let mut s = state(vec![5.0, 1.0]);
        regularized_step(&q, &mut s, 0.1, 1.0, 0.5).unwrap();
        assert_eq!(s.x[0], 5.0);
        assert!(s.x[1] < 1.0);
    }
}
