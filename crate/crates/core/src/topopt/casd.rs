//! Curvature-aware subspace descent for SIMP compliance.

use std::collections::VecDeque;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::fem::TopologyProblem;
use super::projection::project_volume;
use crate::error::{Error, Result};
use crate::instrument::{ProblemInfo, RunStatus, RunTrace, TraceMeta, TraceRow, TRACE_SCHEMA_VERSION};
use crate::rng::RngStream;
use crate::subspace::orthonormalize;
use crate::{DenseMatrix, DenseVector};

/// `value_k = initial · decay^k`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Schedule {
    pub initial: f64,
    #[serde(default = "one")]
    pub decay: f64,
}

fn one() -> f64 {
    1.0
}

impl Schedule {
    pub fn constant(value: f64) -> Self {
        Self {
            initial: value,
            decay: 1.0,
        }
    }

    pub fn at(&self, k: usize) -> f64 {
        self.initial * self.decay.powi(k.min(i32::MAX as usize) as i32)
    }
}

/// Source of the curvature estimates that select the exploration subspace.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CurvatureMode {
    /// Finite differences of the sensitivity along orthonormalized recent
    /// gradients; one extra solve per direction per refresh.
    #[default]
    FiniteDifference,
    /// Secant estimates `yᵀs / sᵀs` from consecutive iterates; no extra solves.
    GradientHistory,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CasdConfig {
    /// Directions with estimated curvature below this receive noise.
    pub curvature_threshold: f64,
    /// Maximum rank `r` of the exploration subspace.
    pub rank: usize,
    /// Gradients (or secant pairs) kept for building directions.
    pub window: usize,
    pub eta: Schedule,
    pub sigma: Schedule,
    pub curvature_mode: CurvatureMode,
    /// Re-estimate curvature every this many iterations.
    pub refresh: usize,
    /// Finite-difference step along unit directions.
    pub fd_step: f64,
}

impl Default for CasdConfig {
    fn default() -> Self {
        Self {
            curvature_threshold: 200.0,
            rank: 4,
            window: 5,
            eta: Schedule::constant(0.003),
            sigma: Schedule {
                initial: 0.02,
                decay: 0.97,
            },
            curvature_mode: CurvatureMode::FiniteDifference,
            refresh: 5,
            fd_step: 1e-4,
        }
    }
}

impl CasdConfig {
    pub fn validate(&self, n: usize) -> Result<()> {
        if !(self.curvature_threshold.is_finite()) {
            return Err(Error::param("curvature_threshold", "must be finite"));
        }
        if self.rank == 0 || self.rank > n {
            return Err(Error::InvalidDimension(format!("rank {} must lie in 1..={n}", self.rank)));
        }
        if self.window == 0 || self.refresh == 0 {
            return Err(Error::param("window", "window and refresh must be positive"));
        }
        if !(self.eta.initial > 0.0 && self.eta.decay > 0.0 && self.eta.decay <= 1.0) {
            return Err(Error::param("eta", "need initial > 0 and decay in (0, 1]"));
        }
        if !(self.sigma.initial >= 0.0 && self.sigma.decay >= 0.0 && self.sigma.decay <= 1.0) {
            return Err(Error::param("sigma", "need initial >= 0 and decay in [0, 1] (nonincreasing)"));
        }
        if !(self.fd_step > 0.0) {
            return Err(Error::param("fd_step", "must be positive"));
        }
        Ok(())
    }
}

/// History carried between CASD iterations.
#[derive(Clone, Debug)]
pub struct CasdState {
    pub k: usize,
    gradients: VecDeque<DenseVector>,
    secants: VecDeque<(DenseVector, DenseVector)>,
    previous: Option<(DenseVector, DenseVector)>,
    /// Low-curvature basis `U_k` and the curvature estimates behind it.
    basis: Option<DenseMatrix>,
    curvatures: Vec<f64>,
}

impl CasdState {
    pub fn new() -> Self {
        Self {
            k: 0,
            gradients: VecDeque::new(),
            secants: VecDeque::new(),
            previous: None,
            basis: None,
            curvatures: Vec::new(),
        }
    }
}

impl Default for CasdState {
    fn default() -> Self {
        Self::new()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CasdReport {
    pub iteration: usize,
    /// Compliance at the input densities.
    pub compliance: f64,
    pub grad_norm: f64,
    pub eta: f64,
    pub sigma: f64,
    /// Columns of `U_k` that received noise (0 when noise was skipped).
    pub noise_rank: usize,
    /// Curvature estimates from the latest refresh.
    pub curvatures: Vec<f64>,
    /// Volume of the returned densities.
    pub volume: f64,
}

/// Directions and curvature estimates for the current refresh.
fn estimate_curvature(
    problem: &TopologyProblem,
    x: &DenseVector,
    g: &DenseVector,
    state: &CasdState,
    config: &CasdConfig,
) -> Result<(DenseMatrix, Vec<f64>)> {
    let n = x.len();
    match config.curvature_mode {
        CurvatureMode::FiniteDifference => {
            let cols: Vec<DenseVector> = state.gradients.iter().rev().cloned().collect();
            if cols.is_empty() {
                return Ok((DenseMatrix::zeros(n, 0), vec![]));
            }
            let q = orthonormalize(&DenseMatrix::from_columns(&cols), 1e-8);
            let q = q.columns(0, q.ncols().min(config.rank)).into_owned();
            // Unit directions move any density by at most the step; keep it
            // below half the smallest density so every probe stays positive.
            let t = config.fd_step.min(0.5 * x.min());
            let mut curv = Vec::with_capacity(q.ncols());
            for d in q.column_iter() {
                let (_, gp) = problem.compliance_and_sensitivity(&(x + t * d))?;
                curv.push((gp - g).dot(&d) / t);
            }
            Ok((q, curv))
        }
        CurvatureMode::GradientHistory => {
            let mut cols = Vec::new();
            let mut curv = Vec::new();
            for (s, y) in state.secants.iter().rev().take(config.rank) {
                let ss = s.norm_squared();
                if ss > 0.0 {
                    cols.push(s / ss.sqrt());
                    curv.push(y.dot(s) / ss);
                }
            }
            if cols.is_empty() {
                return Ok((DenseMatrix::zeros(n, 0), vec![]));
            }
            // Secant directions need not be orthogonal; keep the estimates of
            // the directions that survive orthonormalization.
            let q = orthonormalize(&DenseMatrix::from_columns(&cols), 1e-8);
            curv.truncate(q.ncols());
            Ok((q, curv))
        }
    }
}

/// One CASD iteration: `x⁺ = Proj(x - η_k g + σ_k U_k z)`, `z ~ N(0, I)`,
/// where `U_k` spans the estimated directions with curvature below the
/// threshold. No such direction (or `σ_k = 0`) means a plain projected
/// gradient step, reported with `noise_rank = 0`.
pub fn casd_step(
    problem: &TopologyProblem,
    x: &DenseVector,
    config: &CasdConfig,
    state: &mut CasdState,
    rng: &mut RngStream,
) -> Result<(DenseVector, CasdReport)> {
    config.validate(x.len())?;
    let (c, g) = problem.compliance_and_sensitivity(x)?;
    if let Some((xp, gp)) = &state.previous {
        state.secants.push_back((x - xp, &g - gp));
        if state.secants.len() > config.window {
            state.secants.pop_front();
        }
    }
    state.gradients.push_back(g.clone());
    if state.gradients.len() > config.window {
        state.gradients.pop_front();
    }
    let eta = config.eta.at(state.k);
    let sigma = config.sigma.at(state.k);

    let mut candidate = x - eta * &g;
    let mut noise_rank = 0;
    if sigma > 0.0 {
        if state.k.is_multiple_of(config.refresh) || state.basis.is_none() {
            let (q, curv) = estimate_curvature(problem, x, &g, state, config)?;
            let keep: Vec<usize> = (0..curv.len()).filter(|&i| curv[i] < config.curvature_threshold).collect();
            state.basis = Some(q.select_columns(&keep));
            state.curvatures = curv;
        }
        if let Some(u) = &state.basis {
            noise_rank = u.ncols();
            if noise_rank > 0 {
                let z = rng.gaussian_vector(noise_rank, 1.0)?;
                candidate += sigma * (u * z);
            }
        }
    }
    let x_next = project_volume(&candidate, problem.volume, problem.x_min)?;
    state.previous = Some((x.clone(), g.clone()));
    state.k += 1;
    let report = CasdReport {
        iteration: state.k - 1,
        compliance: c,
        grad_norm: g.norm(),
        eta,
        sigma,
        noise_rank,
        curvatures: state.curvatures.clone(),
        volume: x_next.sum(),
    };
    Ok((x_next, report))
}

/// A finished CASD run.
#[derive(Clone, Debug)]
pub struct TopologyRun {
    /// Rows carry compliance as `f`; `noise_active` marks steps that
    /// injected noise.
    pub trace: RunTrace,
    /// `Σ xᵢ` per recorded iterate.
    pub volumes: Vec<f64>,
    /// `(k, x_k)` every `snapshot_stride` iterations and at the end.
    pub snapshots: Vec<(usize, DenseVector)>,
    pub final_densities: DenseVector,
}

impl TopologyRun {
    /// Writes each snapshot as `density_<k>.csv` in `dir`.
    pub fn write_snapshots(&self, problem: &TopologyProblem, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        for (k, x) in &self.snapshots {
            problem.write_density_csv(x, &dir.join(format!("density_{k:05}.csv")))?;
        }
        Ok(())
    }
}

/// Uniform densities using the whole budget.
pub fn uniform_start(problem: &TopologyProblem) -> DenseVector {
    let n = problem.element_count();
    DenseVector::from_element(n, (problem.volume / n as f64).clamp(problem.x_min, 1.0))
}

/// Runs `iters` CASD steps from the uniform design.
pub fn run_casd(
    problem: &TopologyProblem,
    config: &CasdConfig,
    iters: usize,
    seed: u64,
    mut rng: RngStream,
    snapshot_stride: usize,
) -> Result<TopologyRun> {
    problem.validate()?;
    if snapshot_stride == 0 {
        return Err(Error::param("snapshot_stride", "must be positive"));
    }
    let mut x = uniform_start(problem);
    let mut state = CasdState::new();
    let mut rows = Vec::with_capacity(iters + 1);
    let mut volumes = vec![x.sum()];
    let mut snapshots = vec![(0, x.clone())];
    for k in 0..iters {
        let (next, r) = casd_step(problem, &x, config, &mut state, &mut rng)?;
        rows.push(TraceRow {
            iter: k,
            f: r.compliance,
            grad_norm: r.grad_norm,
            eta: Some(r.eta),
            entropy: None,
            noise_active: Some(r.noise_rank > 0),
            preservation_ratio: None,
        });
        x = next;
        volumes.push(r.volume);
        if (k + 1) % snapshot_stride == 0 || k + 1 == iters {
            snapshots.push((k + 1, x.clone()));
        }
    }
    let (c, g) = problem.compliance_and_sensitivity(&x)?;
    rows.push(TraceRow {
        iter: iters,
        f: c,
        grad_norm: g.norm(),
        eta: None,
        entropy: None,
        noise_active: None,
        preservation_ratio: None,
    });
    let meta = TraceMeta {
        schema_version: TRACE_SCHEMA_VERSION,
        seed,
        method: "casd".into(),
        config: serde_json::to_value(config).expect("CASD configuration serializes"),
        problem: ProblemInfo {
            name: format!("topology-{}x{}", problem.nx, problem.ny),
            dimension: problem.element_count(),
            reference_value: None,
        },
        max_iters: iters,
        snapshot_stride: None,
        status: RunStatus::Completed,
        rows: rows.len(),
    };
    Ok(TopologyRun {
        trace: RunTrace {
            meta,
            rows,
            iterates: Vec::new(),
        },
        volumes,
        snapshots,
        final_densities: x,
    })
}
