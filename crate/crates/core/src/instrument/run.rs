//! Drives a [`Method`] for up to `max_iters` steps while recording a trace.

use super::escape::EscapeMonitor;
use super::trace::{ProblemInfo, RunStatus, RunTrace, TraceMeta, TraceRow, TRACE_SCHEMA_VERSION};
use crate::error::{Error, Result};
use crate::optimizers::{Method, OptimizerState, StepReport};
use crate::problem::ObjectiveProblem;
use crate::rng::RngStream;
use crate::DenseVector;

/// Condition checked at every iterate; the run ends at the first iterate
/// satisfying it.
#[derive(Clone, Debug)]
pub enum StopRule {
    Escape(EscapeMonitor),
    LossBelow(f64),
    GradNormBelow(f64),
}

impl StopRule {
    fn label(&self) -> &'static str {
        match self {
            StopRule::Escape(_) => "escape",
            StopRule::LossBelow(_) => "loss_below",
            StopRule::GradNormBelow(_) => "grad_norm_below",
        }
    }

    fn fires(&self, x: &DenseVector, f: f64, grad_norm: f64) -> bool {
        match self {
            StopRule::Escape(m) => m.escaped(x),
            StopRule::LossBelow(level) => f < *level,
            StopRule::GradNormBelow(tol) => grad_norm <= *tol,
        }
    }
}

#[derive(Clone, Debug)]
pub struct RunOptions {
    pub max_iters: usize,
    /// Record `x_k` for every `k` divisible by this stride.
    pub snapshot_stride: Option<usize>,
    pub stop: Vec<StopRule>,
    /// Stored in the trace so the loss-threshold detector can use it.
    pub reference_value: Option<f64>,
}

impl RunOptions {
    pub fn new(max_iters: usize) -> Self {
        Self {
            max_iters,
            snapshot_stride: None,
            stop: Vec::new(),
            reference_value: None,
        }
    }

    pub fn with_snapshots(mut self, stride: usize) -> Self {
        self.snapshot_stride = Some(stride);
        self
    }

    pub fn stop_when(mut self, rule: StopRule) -> Self {
        self.stop.push(rule);
        self
    }

    pub fn with_reference_value(mut self, f_ref: f64) -> Self {
        self.reference_value = Some(f_ref);
        self
    }
}

/// Result of a run: the trace plus every step report, in order.
#[derive(Clone, Debug)]
pub struct RunOutcome {
    pub trace: RunTrace,
    pub reports: Vec<StepReport>,
    pub final_state: OptimizerState,
}

/// Runs `method` from `x0`, drawing randomness from `rng`. `seed` is recorded
/// in the trace metadata.
///
/// Divergence ends the run and is recorded in the trace status; parameter
/// errors are returned.
pub fn run_method(
    problem: &ObjectiveProblem,
    method: &Method,
    x0: &DenseVector,
    seed: u64,
    rng: RngStream,
    options: &RunOptions,
) -> Result<RunOutcome> {
    if x0.len() != problem.dimension() {
        return Err(Error::DimensionMismatch {
            expected: problem.dimension(),
            actual: x0.len(),
        });
    }
    if options.snapshot_stride == Some(0) {
        return Err(Error::param("snapshot_stride", "must be positive"));
    }
    let mut state = OptimizerState::new(x0.clone(), method.window(), rng);
    let mut rows = Vec::new();
    let mut reports = Vec::new();
    let mut iterates = Vec::new();
    let snapshot = |k: usize, x: &DenseVector, iterates: &mut Vec<(usize, DenseVector)>| {
        if let Some(s) = options.snapshot_stride {
            if k.is_multiple_of(s) {
                iterates.push((k, x.clone()));
            }
        }
    };

    let status = loop {
        let k = state.k;
        snapshot(k, &state.x, &mut iterates);
        let fired = options.stop.iter().find(|r| match r {
            StopRule::Escape(m) => m.escaped(&state.x),
            _ => false,
        });
        let evaluate_now = fired.is_some()
            || k == options.max_iters
            || options.stop.iter().any(|r| !matches!(r, StopRule::Escape(_)));
        if evaluate_now {
            let f = problem.value(&state.x).unwrap_or(f64::NAN);
            let grad_norm = problem.gradient(&state.x).map(|g| g.norm()).unwrap_or(f64::NAN);
            let ended = fired
                .or_else(|| options.stop.iter().find(|r| r.fires(&state.x, f, grad_norm)))
                .map(|r| RunStatus::Stopped { rule: r.label().into() })
                .or_else(|| (k == options.max_iters).then_some(RunStatus::Completed));
            if let Some(status) = ended {
                rows.push(terminal_row(k, f, grad_norm));
                break status;
            }
        }
        match method.step(problem, &mut state) {
            Ok(report) => {
                rows.push(TraceRow {
                    iter: report.iteration,
                    f: report.value,
                    grad_norm: report.grad_norm,
                    eta: report.eta,
                    entropy: report.entropy,
                    noise_active: report.noise_active,
                    preservation_ratio: report.preservation_ratio,
                });
                reports.push(report);
            }
            Err(Error::Diverged { iteration, reason }) => {
                let f = problem.value(&state.x).unwrap_or(f64::NAN);
                let grad_norm = problem.gradient(&state.x).map(|g| g.norm()).unwrap_or(f64::NAN);
                rows.push(terminal_row(k, f, grad_norm));
                break RunStatus::Diverged { iteration, reason };
            }
            Err(e) => return Err(e),
        }
    };

    let meta = TraceMeta {
        schema_version: TRACE_SCHEMA_VERSION,
        seed,
        method: method.name().to_string(),
        config: serde_json::to_value(method).expect("method configurations serialize"),
        problem: ProblemInfo {
            name: problem.name().to_string(),
            dimension: problem.dimension(),
            reference_value: options.reference_value.or_else(|| problem.minimum_value()),
        },
        max_iters: options.max_iters,
        snapshot_stride: options.snapshot_stride,
        status,
        rows: rows.len(),
    };
    Ok(RunOutcome {
        trace: RunTrace { meta, rows, iterates },
        reports,
        final_state: state,
    })
}

fn terminal_row(iter: usize, f: f64, grad_norm: f64) -> TraceRow {
    TraceRow {
        iter,
        f,
        grad_norm,
        eta: None,
        entropy: None,
        noise_active: None,
        preservation_ratio: None,
    }
}
