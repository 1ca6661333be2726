//! Optimizer tunables shared by the steppers and the experiment runner.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Every knob of the combined optimizer, with the per-method subsets read by
/// the individual steppers.
///
/// | field | meaning | default |
/// |---|---|---|
/// | `alpha` | learning-rate scale α | 0.1 |
/// | `epsilon_smooth` | smoothing constant ε | 1e-8 |
/// | `entropy_threshold` | τ; noise fires when the probe entropy exceeds it | 0.9·ln M |
/// | `subspace_dim` | m | 1 |
/// | `window` | h; the covariance uses the last h+1 gradients | 5 |
/// | `noise_sigma` | σ | 0.1 |
/// | `probe_count` | M | 10 |
/// | `probe_scale` | standard deviation of the entropy probes | 1e-2 |
/// | `max_iters` | K | 1000 |
/// | `escape_radius` | δ | 1.0 |
/// | `step_eta` | fixed η for the non-adaptive steppers | none |
/// | `basis_refresh` | recompute the covariance basis every this many steps | 1 |
/// | `project_iterate` | project the iterate instead of the step | false |
/// | `covariance_filter` | weight applied to covariance eigenvalues | `inverse_sqrt` |
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OptimizerConfig {
    pub alpha: f64,
    pub epsilon_smooth: f64,
    pub entropy_threshold: f64,
    pub subspace_dim: usize,
    pub window: usize,
    pub noise_sigma: f64,
    pub probe_count: usize,
    pub probe_scale: f64,
    pub max_iters: usize,
    pub escape_radius: f64,
    pub step_eta: Option<f64>,
    /// Recompute the covariance basis every `basis_refresh` iterations.
    pub basis_refresh: usize,
    /// Project the iterate itself (through the origin) instead of the step.
    pub project_iterate: bool,
    pub covariance_filter: CovarianceFilter,
}

/// Weight `φ` applied to the window-covariance eigenvalues by the combined
/// optimizer.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CovarianceFilter {
    /// `φ(λ) = 1/√(|λ| + ε)`.
    #[default]
    InverseSqrt,
    /// `φ ≡ 1`: plain projection onto the top eigenvectors.
    Identity,
}

impl CovarianceFilter {
    pub fn weight(self, lambda: f64, epsilon: f64) -> f64 {
        match self {
            CovarianceFilter::InverseSqrt => 1.0 / (lambda.abs() + epsilon).sqrt(),
            CovarianceFilter::Identity => 1.0,
        }
    }
}

pub fn default_entropy_threshold(probe_count: usize) -> f64 {
    0.9 * (probe_count as f64).ln()
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            alpha: 0.1,
            epsilon_smooth: 1e-8,
            entropy_threshold: default_entropy_threshold(10),
            subspace_dim: 1,
            window: 5,
            noise_sigma: 0.1,
            probe_count: 10,
            probe_scale: 1e-2,
            max_iters: 1000,
            escape_radius: 1.0,
            step_eta: None,
            basis_refresh: 1,
            project_iterate: false,
            covariance_filter: CovarianceFilter::InverseSqrt,
        }
    }
}

impl OptimizerConfig {
    /// Checks the invariants against a problem of dimension `n`.
    pub fn validate(&self, n: usize) -> Result<()> {
        let positive = |name: &'static str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::param(name, format!("must be positive, got {v}")))
            }
        };
        positive("alpha", self.alpha)?;
        positive("epsilon_smooth", self.epsilon_smooth)?;
        positive("probe_scale", self.probe_scale)?;
        positive("escape_radius", self.escape_radius)?;
        if let Some(eta) = self.step_eta {
            positive("step_eta", eta)?;
        }
        if !(self.noise_sigma >= 0.0) {
            return Err(Error::param("noise_sigma", "must be >= 0"));
        }
        if self.subspace_dim == 0 || self.subspace_dim > n {
            return Err(Error::InvalidDimension(format!(
                "subspace_dim {} must lie in 1..={n}",
                self.subspace_dim
            )));
        }
        if self.probe_count < 2 {
            return Err(Error::param("probe_count", "need at least 2 probes"));
        }
        if self.max_iters == 0 {
            return Err(Error::param("max_iters", "must be positive"));
        }
        if self.basis_refresh == 0 {
            return Err(Error::param("basis_refresh", "must be positive"));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        OptimizerConfig::default().validate(3).unwrap();
    }

    #[test]
    fn subspace_larger_than_problem_is_rejected() {
        let cfg = OptimizerConfig {
            subspace_dim: 4,
            ..Default::default()
        };
        assert!(cfg.validate(3).is_err());
    }

    #[test]
    fn single_probe_is_rejected() {
        let cfg = OptimizerConfig {
            probe_count: 1,
            ..Default::default()
        };
        assert!(cfg.validate(3).is_err());
    }

    #[test]
    fn partial_json_fills_defaults() {
        let cfg: OptimizerConfig = serde_json::from_str(r#"{"alpha": 0.05}"#).unwrap();
        assert_eq!(cfg.alpha, 0.05);
        assert_eq!(cfg.probe_count, 10);
    }
}
