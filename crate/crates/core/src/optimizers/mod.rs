//! Update rules behind one stepping interface.
//!
//! Each stepper reads the problem, advances an [`OptimizerState`] by one
//! iteration and returns a [`StepReport`] describing what ran. Steppers never
//! touch anything except the state and its random stream; escape detection
//! and trace bookkeeping live in [`crate::instrument`].

mod caegsd;
mod entropy;
mod flow;
mod spectral_steps;
mod steps;

use serde::{Deserialize, Serialize};

use crate::config::OptimizerConfig;
use crate::error::Result;
use crate::problem::ObjectiveProblem;
use crate::rng::RngStream;
use crate::subspace::{GradientWindow, SubspaceBasis};
use crate::DenseVector;

pub use crate::config::CovarianceFilter;
pub use caegsd::{caegsd_step, NoiseAccounting};
pub use entropy::{entropy_of_norms, entropy_probe, EntropyProbe};
pub use flow::{gradient_flow, gradient_flow_with, FlowOptions, FlowStatus, FlowTrajectory};
pub use spectral_steps::{filtered_step, regularized_step, shaped_step};
pub use steps::{
    adaptive_step, adaptive_step_with, gd_step, noisy_gd_step, random_subspace_step, subspace_step,
    AccumulatorRule,
};

/// Evolving state of one optimizer run.
#[derive(Clone, Debug)]
pub struct OptimizerState {
    /// Current iterate `x_k`.
    pub x: DenseVector,
    /// Iteration counter `k`.
    pub k: usize,
    pub window: GradientWindow,
    /// Adaptive accumulator `v_k`.
    pub v: f64,
    pub rng: RngStream,
    /// One entry per entropy-gated step: whether noise fired.
    pub noise_log: Vec<bool>,
    pub(crate) cached_basis: Option<(SubspaceBasis, DenseVector)>,
}

impl OptimizerState {
    /// Fresh state at `x0` with a gradient window over the last `h + 1` gradients.
    pub fn new(x0: DenseVector, h: usize, rng: RngStream) -> Self {
        Self {
            x: x0,
            k: 0,
            window: GradientWindow::new(h),
            v: 0.0,
            rng,
            noise_log: Vec::new(),
            cached_basis: None,
        }
    }
}

/// What a single step did. Optional fields are present exactly when the
/// corresponding mechanism ran.
#[derive(Clone, Debug, PartialEq)]
pub struct StepReport {
    /// Index `k` of the iterate the step started from.
    pub iteration: usize,
    /// `f(x_k)`.
    pub value: f64,
    /// `‖∇f(x_k)‖`.
    pub grad_norm: f64,
    /// `x_{k+1}`.
    pub x_next: DenseVector,
    pub eta: Option<f64>,
    /// Raw draw `ζ_k` (before scaling by `η_k`).
    pub noise: Option<DenseVector>,
    pub noise_active: Option<bool>,
    pub entropy: Option<f64>,
    pub preservation_ratio: Option<f64>,
    /// `min_{λ<0} φ(λ)|λ|` of the filtered step.
    pub gamma_eff: Option<f64>,
    pub kappa_eff: Option<f64>,
    /// The combined optimizer fell back to a plain adaptive step.
    pub fallback: bool,
}

impl StepReport {
    pub(crate) fn basic(iteration: usize, value: f64, grad_norm: f64, x_next: DenseVector) -> Self {
        Self {
            iteration,
            value,
            grad_norm,
            x_next,
            eta: None,
            noise: None,
            noise_active: None,
            entropy: None,
            preservation_ratio: None,
            gamma_eff: None,
            kappa_eff: None,
            fallback: false,
        }
    }
}

/// A configured update rule.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case", deny_unknown_fields)]
pub enum Method {
    Gd {
        eta: f64,
    },
    NoisyGd {
        eta: f64,
        sigma: f64,
    },
    Adaptive {
        alpha: f64,
        epsilon: f64,
        #[serde(default)]
        ema_decay: Option<f64>,
    },
    RandomSubspace {
        eta: f64,
        m: usize,
    },
    Caegsd(OptimizerConfig),
    Filtered {
        alpha: f64,
        epsilon: f64,
    },
    Shaped {
        eta: f64,
        p: f64,
    },
    Regularized {
        eta: f64,
        p: f64,
        delta: f64,
    },
}

impl Method {
    /// Selector names accepted in experiment files.
    pub const NAMES: &'static [&'static str] = &[
        "gd",
        "noisy_gd",
        "adaptive",
        "random_subspace",
        "caegsd",
        "filtered",
        "shaped",
        "regularized",
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Method::Gd { .. } => "gd",
            Method::NoisyGd { .. } => "noisy_gd",
            Method::Adaptive { .. } => "adaptive",
            Method::RandomSubspace { .. } => "random_subspace",
            Method::Caegsd(_) => "caegsd",
            Method::Filtered { .. } => "filtered",
            Method::Shaped { .. } => "shaped",
            Method::Regularized { .. } => "regularized",
        }
    }

    /// Gradient-window length `h` the method needs in its state.
    pub fn window(&self) -> usize {
        match self {
            Method::Caegsd(cfg) => cfg.window,
            _ => 0,
        }
    }

    pub fn step(&self, problem: &ObjectiveProblem, state: &mut OptimizerState) -> Result<StepReport> {
        match self {
            Method::Gd { eta } => gd_step(problem, state, *eta),
            Method::NoisyGd { eta, sigma } => noisy_gd_step(problem, state, *eta, *sigma),
            Method::Adaptive {
                alpha,
                epsilon,
                ema_decay,
            } => {
                let rule = match ema_decay {
                    Some(d) => AccumulatorRule::Ema { decay: *d },
                    None => AccumulatorRule::Exact,
                };
                adaptive_step_with(problem, state, *alpha, *epsilon, rule)
            }
            Method::RandomSubspace { eta, m } => random_subspace_step(problem, state, *eta, *m),
            Method::Caegsd(cfg) => caegsd_step(problem, state, cfg),
            Method::Filtered { alpha, epsilon } => filtered_step(problem, state, *alpha, *epsilon),
            Method::Shaped { eta, p } => shaped_step(problem, state, *eta, *p),
            Method::Regularized { eta, p, delta } => regularized_step(problem, state, *eta, *p, *delta),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn method_json_round_trip() {
        let m: Method = serde_json::from_str(r#"{"name": "noisy_gd", "eta": 0.01, "sigma": 1.0}"#).unwrap();
        assert_eq!(m, Method::NoisyGd { eta: 0.01, sigma: 1.0 });
        let c: Method = serde_json::from_str(r#"{"name": "caegsd", "alpha": 0.2}"#).unwrap();
        match &c {
            Method::Caegsd(cfg) => assert_eq!(cfg.alpha, 0.2),
            _ => panic!(),
        }
        let back: Method = serde_json::from_str(&serde_json::to_string(&c).unwrap()).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn names_cover_every_variant() {
        let all = [
            Method::Gd { eta: 1.0 },
            Method::NoisyGd { eta: 1.0, sigma: 0.0 },
            Method::Adaptive {
                alpha: 1.0,
                epsilon: 1.0,
                ema_decay: None,
            },
            Method::RandomSubspace { eta: 1.0, m: 1 },
            Method::Caegsd(OptimizerConfig::default()),
            Method::Filtered { alpha: 1.0, epsilon: 1.0 },
            Method::Shaped { eta: 1.0, p: 1.0 },
            Method::Regularized {
                eta: 1.0,
                p: 1.0,
                delta: 1.0,
            },
        ];
        let names: Vec<_> = all.iter().map(Method::name).collect();
        assert_eq!(names, Method::NAMES);
    }
}
