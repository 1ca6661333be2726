//! Curvature-adaptive optimizers for non-convex problems with strict saddles.
//!
//! The crate is organised bottom-up:
//!
//! - [`problem`], [`rng`] and [`config`] hold the shared types: objectives with
//!   gradients and optional Hessians, the seeded random stream every stochastic
//!   routine draws from, and the optimizer tunables.
//! - [`objectives`] ships the benchmark problems (chained Rosenbrock, diagonal
//!   quadratic saddles, smoothed ℓ1 logistic regression, `eˣ sin x`).
//! - [`spectral`] wraps a deterministic symmetric eigendecomposition and the
//!   gradient filter, descent-shaping and spectral-regularization operators.
//! - [`subspace`] builds random and gradient-covariance subspaces.
//! - [`optimizers`] contains every update rule plus the combined
//!   curvature-adaptive entropy-guided subspace descent ([`optimizers::caegsd_step`])
//!   and an RK4 gradient-flow integrator.
//! - [`instrument`] detects saddle escape, measures convergence, fits
//!   dimension-scaling laws and persists traces.
//! - [`topopt`] is a small SIMP compliance-minimization application driven by
//!   curvature-aware subspace descent.
//!
//! ```
//! use curvopt::objectives::{make_quadratic_saddle, QuadraticSaddleSpec};
//! use curvopt::optimizers::{gd_step, OptimizerState};
//! use curvopt::rng::RngStream;
//! use curvopt::DenseVector;
//!
//! let problem = make_quadratic_saddle(QuadraticSaddleSpec { n: 4, k: 1 }).unwrap();
//! let x0 = DenseVector::from_vec(vec![0.01, 0.0, 0.0, 0.0]);
//! let mut state = OptimizerState::new(x0, 0, RngStream::new(7));
//! gd_step(&problem, &mut state, 0.1).unwrap();
//! // The unstable coordinate grows by (1 + ηγ) per step.
//! assert!((state.x[0] - 0.011).abs() < 1e-15);
//! ```

pub mod config;
pub mod error;
pub mod instrument;
pub mod objectives;
pub mod optimizers;
pub mod problem;
pub mod rng;
pub mod spectral;
pub mod subspace;
pub mod topopt;

pub use config::OptimizerConfig;
pub use error::{Error, Result};
pub use problem::ObjectiveProblem;
pub use rng::RngStream;

/// Column vector used for iterates, gradients and noise draws.
pub type DenseVector = nalgebra::DVector<f64>;
/// Dense matrix used for Hessians, covariances and bases.
pub type DenseMatrix = nalgebra::DMatrix<f64>;
