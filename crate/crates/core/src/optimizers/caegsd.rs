//! The combined optimizer: covariance-filtered subspace descent with
//! entropy-gated noise.

use super::entropy::entropy_probe;
use super::steps::{commit, evaluate, projected_update};
use super::{OptimizerState, StepReport};
use crate::config::OptimizerConfig;
use crate::error::{Error, Result};
use crate::problem::ObjectiveProblem;
use crate::subspace::{covariance_eigenpairs, ProjectionMode};
use crate::DenseVector;

/// One iteration of the combined optimizer.
///
/// In order: evaluate `g_k`; push it onto the gradient window; take the top
/// `m` eigenpairs of the window covariance `Ĉ_k`; form the filtered gradient
/// `Σ φ(λᵢ)⟨g_k, vᵢ⟩vᵢ`; set `η_k = α / (‖g_filtered‖ + ε)`; probe the
/// gradient-norm entropy `H_k`; draw `ζ_k ~ N(0, σ² I)` when `H_k > τ`;
/// project the displacement `-η_k g_filtered + η_k ζ_k` onto the eigenvector
/// span.
///
/// A window whose gradients are all zero has no covariance spectrum. That
/// iteration takes a plain adaptive step instead and reports `fallback`.
pub fn caegsd_step(
    problem: &ObjectiveProblem,
    state: &mut OptimizerState,
    config: &OptimizerConfig,
) -> Result<StepReport> {
    let n = state.x.len();
    config.validate(n)?;
    let (f, g) = evaluate(problem, state)?;
    state.window.push(g.clone());

    let refresh = state.k.is_multiple_of(config.basis_refresh) || state.cached_basis.is_none();
    if refresh {
        match covariance_eigenpairs(&state.window, config.subspace_dim) {
            Ok(pair) => state.cached_basis = Some(pair),
            Err(Error::DegenerateWindow) => state.cached_basis = None,
            Err(e) => return Err(e),
        }
    }
    let Some((basis, eigenvalues)) = state.cached_basis.clone() else {
        return fallback(state, f, g, config);
    };
    let mode = if config.project_iterate {
        ProjectionMode::Iterate
    } else {
        ProjectionMode::Displacement
    };
    let basis = basis.with_mode(mode);

    let coeffs = basis.matrix().tr_mul(&g);
    let weighted = DenseVector::from_fn(coeffs.len(), |i, _| {
        config.covariance_filter.weight(eigenvalues[i], config.epsilon_smooth) * coeffs[i]
    });
    let g_filtered = basis.matrix() * weighted;
    let eta = config.alpha / (g_filtered.norm() + config.epsilon_smooth);

    let probe = entropy_probe(problem, &state.x, &mut state.rng, config.probe_count, config.probe_scale)?;
    let active = probe.entropy > config.entropy_threshold;
    let zeta = if active && config.noise_sigma > 0.0 {
        state.rng.gaussian_vector(n, config.noise_sigma)?
    } else {
        DenseVector::zeros(n)
    };

    let step = eta * (&zeta - &g_filtered);
    let x_next = projected_update(&state.x, &step, &basis)?;
    let ratio = basis.preservation_ratio(&g).ok();
    commit(state, &x_next)?;
    state.noise_log.push(active);

    let mut report = StepReport::basic(state.k - 1, f, g.norm(), x_next);
    report.eta = Some(eta);
    report.entropy = Some(probe.entropy);
    report.noise_active = Some(active);
    report.noise = active.then_some(zeta);
    report.preservation_ratio = ratio;
    Ok(report)
}

fn fallback(state: &mut OptimizerState, f: f64, g: DenseVector, config: &OptimizerConfig) -> Result<StepReport> {
    let gn = g.norm();
    state.v = gn * gn;
    let eta = config.alpha / (gn + config.epsilon_smooth);
    let x_next = &state.x - eta * &g;
    commit(state, &x_next)?;
    let mut report = StepReport::basic(state.k - 1, f, gn, x_next);
    report.eta = Some(eta);
    report.fallback = true;
    Ok(report)
}

/// Noise bookkeeping over a run of entropy-gated steps.
///
/// Budgets count the per-step variance `nσ²` of one raw draw `ζ_k`; the
/// injected totals weight each draw by `η_k²` as it enters the iterate.
#[derive(Clone, Debug, PartialEq)]
pub struct NoiseAccounting {
    pub steps: usize,
    pub activations: usize,
    /// Activation fraction ν.
    pub nu: f64,
    /// `activations · n σ²`.
    pub gated_budget: f64,
    /// `steps · n σ²`, what always-on noise would spend.
    pub always_on_budget: f64,
    /// `n σ² Σ_{active k} η_k²`.
    pub injected_variance: f64,
    /// `n σ² Σ_k η_k²`.
    pub always_on_variance: f64,
}

impl NoiseAccounting {
    /// Tallies `(active, η_k)` pairs for an `n`-dimensional run with noise
    /// scale `sigma`.
    pub fn tally(n: usize, sigma: f64, steps: impl IntoIterator<Item = (bool, f64)>) -> Self {
        let per_draw = n as f64 * sigma * sigma;
        let (mut total, mut active, mut eta_all, mut eta_active) = (0usize, 0usize, 0.0, 0.0);
        for (on, eta) in steps {
            total += 1;
            eta_all += eta * eta;
            if on {
                active += 1;
                eta_active += eta * eta;
            }
        }
        let nu = if total == 0 { 0.0 } else { active as f64 / total as f64 };
        Self {
            steps: total,
            activations: active,
            nu,
            gated_budget: active as f64 * per_draw,
            always_on_budget: total as f64 * per_draw,
            injected_variance: per_draw * eta_active,
            always_on_variance: per_draw * eta_all,
        }
    }

    /// Tallies the gated steps among `reports`, skipping fallback steps.
    pub fn from_reports(n: usize, sigma: f64, reports: &[StepReport]) -> Self {
        Self::tally(
            n,
            sigma,
            reports
                .iter()
                .filter_map(|r| Some((r.noise_active?, r.eta.unwrap_or(0.0)))),
        )
    }

    /// Variance saved relative to always-on noise, `(1 - ν) · steps · nσ²`.
    pub fn reduction(&self) -> f64 {
        self.always_on_budget - self.gated_budget
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::CovarianceFilter;
    use crate::objectives::{make_quadratic_saddle, make_rosenbrock, QuadraticSaddleSpec};
    use crate::optimizers::adaptive_step;
    use crate::rng::RngStream;

    fn saddle(n: usize, k: usize) -> ObjectiveProblem {
        make_quadratic_saddle(QuadraticSaddleSpec { n, k }).unwrap()
    }

    #[test]
    fn collinear_window_steps_along_filtered_gradient() {
        // Isotropic bowl started on a ray: every gradient is parallel.
        let p = crate::objectives::make_diagonal_quadratic("bowl", vec![1.0; 3]).unwrap();
        let dir = DenseVector::from_vec(vec![1.0, 2.0, 2.0]) / 3.0;
        let mut s = OptimizerState::new(0.5 * &dir, 4, RngStream::new(2));
        let cfg = OptimizerConfig {
            entropy_threshold: f64::INFINITY,
            ..Default::default()
        };
        for _ in 0..3 {
            let x = s.x.clone();
            let g = p.gradient(&x).unwrap();
            let r = caegsd_step(&p, &mut s, &cfg).unwrap();
            assert_eq!(r.noise_active, Some(false));
            let lambda: f64 = s.window.iter().map(|w| w.norm_squared()).sum();
            let g_f = &g / (lambda + cfg.epsilon_smooth).sqrt();
            let eta = cfg.alpha / (g_f.norm() + cfg.epsilon_smooth);
            let expected = &x - eta * g_f;
            assert!((&r.x_next - expected).norm() < 1e-12);
        }
    }

    #[test]
    fn zero_sigma_is_deterministic() {
        let p = make_rosenbrock(6).unwrap();
        let cfg = OptimizerConfig {
            noise_sigma: 0.0,
            entropy_threshold: 0.0,
            subspace_dim: 2,
            ..Default::default()
        };
        let run = |seed| {
            let mut s = OptimizerState::new(DenseVector::zeros(6), cfg.window, RngStream::new(seed));
            for _ in 0..30 {
                caegsd_step(&p, &mut s, &cfg).unwrap();
            }
            (s.x, s.noise_log)
        };
        let (a, log) = run(1);
        let (b, _) = run(2);
        assert!(log.iter().all(|&on| on));
        assert_eq!(a, b);
    }

    #[test]
    fn degenerates_to_adaptive() {
        let p = make_rosenbrock(4).unwrap();
        let cfg = OptimizerConfig {
            noise_sigma: 0.0,
            subspace_dim: 4,
            window: 0,
            covariance_filter: CovarianceFilter::Identity,
            ..Default::default()
        };
        let x0 = DenseVector::from_vec(vec![-1.2, 1.0, -0.5, 0.3]);
        let mut a = OptimizerState::new(x0.clone(), 0, RngStream::new(5));
        let mut b = OptimizerState::new(x0, 0, RngStream::new(5));
        for _ in 0..200 {
            let ra = adaptive_step(&p, &mut a, cfg.alpha, cfg.epsilon_smooth).unwrap();
            let rb = caegsd_step(&p, &mut b, &cfg).unwrap();
            assert!((ra.eta.unwrap() - rb.eta.unwrap()).abs() <= 1e-12 * ra.eta.unwrap());
            assert!((&a.x - &b.x).norm() <= 1e-10 * (1.0 + a.x.norm()));
        }
    }

    #[test]
    fn zero_window_falls_back() {
        let p = saddle(3, 1);
        let mut s = OptimizerState::new(DenseVector::zeros(3), 2, RngStream::new(0));
        let r = caegsd_step(&p, &mut s, &OptimizerConfig::default()).unwrap();
        assert!(r.fallback);
        assert_eq!(r.entropy, None);
        assert_eq!(s.x, DenseVector::zeros(3));
        assert!(s.noise_log.is_empty());
    }

    #[test]
    fn step_stays_in_eigenvector_span() {
        let p = make_rosenbrock(8).unwrap();
        let cfg = OptimizerConfig {
            subspace_dim: 2,
            entropy_threshold: 0.0,
            noise_sigma: 0.5,
            ..Default::default()
        };
        let mut s = OptimizerState::new(DenseVector::from_element(8, 0.3), cfg.window, RngStream::new(9));
        for _ in 0..10 {
            let x = s.x.clone();
            let r = caegsd_step(&p, &mut s, &cfg).unwrap();
            let (basis, _) = s.cached_basis.clone().unwrap();
            let d = &r.x_next - &x;
            let resid = &d - basis.project(&d).unwrap();
            assert!(resid.norm() <= 1e-12 * (1.0 + d.norm()));
            assert!(r.noise.is_some());
        }
    }

    #[test]
    fn variance_accounting_identity() {
        let p = make_rosenbrock(5).unwrap();
        let cfg = OptimizerConfig {
            entropy_threshold: 10f64.ln() - 1e-3,
            noise_sigma: 0.2,
            subspace_dim: 2,
            ..Default::default()
        };
        let mut s = OptimizerState::new(DenseVector::zeros(5), cfg.window, RngStream::new(4));
        let reports: Vec<_> = (0..200).map(|_| caegsd_step(&p, &mut s, &cfg).unwrap()).collect();
        let acc = NoiseAccounting::from_reports(5, 0.2, &reports);
        let log_on = s.noise_log.iter().filter(|&&b| b).count();
        assert_eq!(acc.activations, log_on);
        assert_eq!(acc.steps, s.noise_log.len());
        let per = 5.0 * 0.04;
        let direct: f64 = reports
            .iter()
            .filter(|r| r.noise_active == Some(true))
            .map(|r| per * r.eta.unwrap().powi(2))
            .sum();
        assert!((acc.injected_variance - direct).abs() <= 1e-12 * direct.max(1.0));
        assert!((acc.gated_budget - acc.nu * acc.steps as f64 * per).abs() <= 1e-12 * acc.always_on_budget);
        assert!((acc.reduction() - (1.0 - acc.nu) * acc.always_on_budget).abs() <= 1e-12 * acc.always_on_budget);
    }
}
