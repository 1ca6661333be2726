//! Objective functions with gradients, optional Hessians and known critical points.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::{DenseMatrix, DenseVector};

type ValueFn = Arc<dyn Fn(&DenseVector) -> f64 + Send + Sync>;
type GradientFn = Arc<dyn Fn(&DenseVector) -> DenseVector + Send + Sync>;
type HessianFn = Arc<dyn Fn(&DenseVector) -> DenseMatrix + Send + Sync>;

/// Relative scale of the central-difference step used to validate gradients.
pub const GRADIENT_FD_SCALE: f64 = 1e-5;
/// Relative scale of the central-difference step used for Hessians of
/// problems without an analytic one.
pub const HESSIAN_FD_SCALE: f64 = 1e-4;

/// A twice-differentiable objective `f: ℝⁿ → ℝ`.
///
/// Immutable once built; clones share the underlying closures, so problems can
/// be handed to parallel runs freely.
#[derive(Clone)]
pub struct ObjectiveProblem {
    name: String,
    dimension: usize,
    value_fn: ValueFn,
    gradient_fn: GradientFn,
    hessian_fn: Option<HessianFn>,
    known_saddle: Option<DenseVector>,
    known_minimum: Option<DenseVector>,
    lipschitz_hint: Option<f64>,
}

impl fmt::Debug for ObjectiveProblem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ObjectiveProblem")
            .field("name", &self.name)
            .field("dimension", &self.dimension)
            .field("exact_hessian", &self.hessian_fn.is_some())
            .field("lipschitz_hint", &self.lipschitz_hint)
            .finish_non_exhaustive()
    }
}

impl ObjectiveProblem {
    pub fn new<V, G>(name: impl Into<String>, dimension: usize, value: V, gradient: G) -> Result<Self>
    where
        V: Fn(&DenseVector) -> f64 + Send + Sync + 'static,
        G: Fn(&DenseVector) -> DenseVector + Send + Sync + 'static,
    {
        if dimension == 0 {
            return Err(Error::InvalidDimension("objective dimension must be positive".into()));
        }
        Ok(Self {
            name: name.into(),
            dimension,
            value_fn: Arc::new(value),
            gradient_fn: Arc::new(gradient),
            hessian_fn: None,
            known_saddle: None,
            known_minimum: None,
            lipschitz_hint: None,
        })
    }

    pub fn with_hessian<H>(mut self, hessian: H) -> Self
    where
        H: Fn(&DenseVector) -> DenseMatrix + Send + Sync + 'static,
    {
        self.hessian_fn = Some(Arc::new(hessian));
        self
    }

    pub fn with_known_saddle(mut self, x: DenseVector) -> Self {
        debug_assert_eq!(x.len(), self.dimension);
        self.known_saddle = Some(x);
        self
    }

    pub fn with_known_minimum(mut self, x: DenseVector) -> Self {
        debug_assert_eq!(x.len(), self.dimension);
        self.known_minimum = Some(x);
        self
    }

    pub fn with_lipschitz_hint(mut self, l: f64) -> Self {
        debug_assert!(l > 0.0);
        self.lipschitz_hint = Some(l);
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn known_saddle(&self) -> Option<&DenseVector> {
        self.known_saddle.as_ref()
    }

    pub fn known_minimum(&self) -> Option<&DenseVector> {
        self.known_minimum.as_ref()
    }

    pub fn lipschitz_hint(&self) -> Option<f64> {
        self.lipschitz_hint
    }

    pub fn has_exact_hessian(&self) -> bool {
        self.hessian_fn.is_some()
    }

    /// Objective value at the known minimum, if one is registered.
    pub fn minimum_value(&self) -> Option<f64> {
        self.known_minimum.as_ref().map(|x| (self.value_fn)(x))
    }

    fn check_dim(&self, x: &DenseVector) -> Result<()> {
        if x.len() != self.dimension {
            return Err(Error::DimensionMismatch {
                expected: self.dimension,
                actual: x.len(),
            });
        }
        Ok(())
    }

    pub fn value(&self, x: &DenseVector) -> Result<f64> {
        self.check_dim(x)?;
        let f = (self.value_fn)(x);
        if f.is_finite() {
            Ok(f)
        } else {
            Err(Error::NonFinite("objective value"))
        }
    }

    pub fn gradient(&self, x: &DenseVector) -> Result<DenseVector> {
        self.check_dim(x)?;
        let g = (self.gradient_fn)(x);
        if g.len() != self.dimension {
            return Err(Error::DimensionMismatch {
                expected: self.dimension,
                actual: g.len(),
            });
        }
        if g.iter().all(|v| v.is_finite()) {
            Ok(g)
        } else {
            Err(Error::NonFinite("gradient"))
        }
    }

    /// Analytic Hessian when available, otherwise central differences of the
    /// gradient with step `1e-4·(1+‖x‖)`, symmetrized.
    pub fn hessian(&self, x: &DenseVector) -> Result<DenseMatrix> {
        self.check_dim(x)?;
        match &self.hessian_fn {
            Some(h) => {
                let h = h(x);
                if h.iter().all(|v| v.is_finite()) {
                    Ok(h)
                } else {
                    Err(Error::NonFinite("hessian"))
                }
            }
            None => finite_diff_hessian(self, x, HESSIAN_FD_SCALE * (1.0 + x.norm())),
        }
    }
}

/// Scale-aware default step for gradient validation: `1e-5·(1+‖x‖)`.
pub fn default_fd_step(x: &DenseVector) -> f64 {
    GRADIENT_FD_SCALE * (1.0 + x.norm())
}

/// Central-difference gradient `(f(x+h·eᵢ) − f(x−h·eᵢ)) / 2h`.
pub fn finite_diff_gradient(problem: &ObjectiveProblem, x: &DenseVector, step: f64) -> Result<DenseVector> {
    if !(step > 0.0) {
        return Err(Error::param("step", format!("must be positive, got {step}")));
    }
    problem.check_dim(x)?;
    let mut probe = x.clone();
    let mut out = DenseVector::zeros(x.len());
    for i in 0..x.len() {
        let xi = x[i];
        probe[i] = xi + step;
        let fp = problem.value(&probe)?;
        probe[i] = xi - step;
        let fm = problem.value(&probe)?;
        probe[i] = xi;
        out[i] = (fp - fm) / (2.0 * step);
    }
    Ok(out)
}

/// Central differences of the gradient, symmetrized as `(J + Jᵀ)/2`.
pub fn finite_diff_hessian(problem: &ObjectiveProblem, x: &DenseVector, step: f64) -> Result<DenseMatrix> {
    if !(step > 0.0) {
        return Err(Error::param("step", format!("must be positive, got {step}")));
    }
    let n = problem.dimension();
    let mut jac = DenseMatrix::zeros(n, n);
    let mut probe = x.clone();
    for j in 0..n {
        let xj = x[j];
        probe[j] = xj + step;
        let gp = problem.gradient(&probe)?;
        probe[j] = xj - step;
        let gm = problem.gradient(&probe)?;
        probe[j] = xj;
        jac.set_column(j, &((gp - gm) / (2.0 * step)));
    }
    Ok((&jac + jac.transpose()) * 0.5)
}

/// Relative disagreement `‖∇f − ∇f_fd‖ / max(‖∇f‖, 1)` at `x`, with the
/// default finite-difference step.
pub fn gradient_check(problem: &ObjectiveProblem, x: &DenseVector) -> Result<f64> {
    let g = problem.gradient(x)?;
    let fd = finite_diff_gradient(problem, x, default_fd_step(x))?;
    Ok((&g - &fd).norm() / g.norm().max(1.0))
}

/// Relative disagreement between the analytic Hessian and central differences
/// of the gradient, `‖H − H_fd‖_F / max(‖H‖_F, 1)`. `None` if the problem has
/// no analytic Hessian.
pub fn hessian_check(problem: &ObjectiveProblem, x: &DenseVector) -> Result<Option<f64>> {
    let Some(h) = &problem.hessian_fn else {
        return Ok(None);
    };
    let exact = h(x);
    let fd = finite_diff_hessian(problem, x, HESSIAN_FD_SCALE * (1.0 + x.norm()))?;
    Ok(Some((&exact - &fd).norm() / exact.norm().max(1.0)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cubic() -> ObjectiveProblem {
        ObjectiveProblem::new(
            "cubic",
            2,
            |x| x[0].powi(3) + x[0] * x[1],
            |x| DenseVector::from_vec(vec![3.0 * x[0] * x[0] + x[1], x[0]]),
        )
        .unwrap()
    }

    #[test]
    fn fd_gradient_matches_analytic() {
        let p = cubic();
        let x = DenseVector::from_vec(vec![0.7, -1.3]);
        assert!(gradient_check(&p, &x).unwrap() < 1e-8);
    }

    #[test]
    fn fd_hessian_is_symmetric_and_accurate() {
        let p = cubic();
        let x = DenseVector::from_vec(vec![0.5, 2.0]);
        let h = p.hessian(&x).unwrap();
        assert!((h[(0, 0)] - 3.0).abs() < 1e-6);
        assert!((h[(0, 1)] - 1.0).abs() < 1e-8);
        assert_eq!(h[(0, 1)], h[(1, 0)]);
    }

    #[test]
    fn wrong_dimension_is_rejected() {
        let p = cubic();
        let x = DenseVector::zeros(3);
        assert!(matches!(p.value(&x), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn non_finite_value_propagates() {
        let p = ObjectiveProblem::new("log", 1, |x| x[0].ln(), |x| DenseVector::from_element(1, 1.0 / x[0])).unwrap();
        let x = DenseVector::from_element(1, -1.0);
        assert!(matches!(p.value(&x), Err(Error::NonFinite(_))));
        let near = DenseVector::from_element(1, 1e-7);
        assert!(finite_diff_gradient(&p, &near, 1e-6).is_err());
    }

    #[test]
    fn non_positive_step_is_rejected() {
        let p = cubic();
        assert!(finite_diff_gradient(&p, &DenseVector::zeros(2), 0.0).is_err());
    }
}
