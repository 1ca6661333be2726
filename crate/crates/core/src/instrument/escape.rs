//! Escape detection in the unstable-eigendirection coordinate and by loss
//! threshold.

use super::trace::RunTrace;
use crate::error::{Error, Result};
use crate::problem::ObjectiveProblem;
use crate::spectral::eigh;
use crate::DenseVector;

/// Tracks the coordinate `y = ⟨x - x*, v₁⟩` along the most unstable Hessian
/// direction `v₁` of a known saddle `x*`.
#[derive(Clone, Debug, PartialEq)]
pub struct EscapeMonitor {
    pub saddle: DenseVector,
    pub direction: DenseVector,
    /// `γ = |λ_min|` at the saddle.
    pub gamma: f64,
    pub delta: f64,
}

impl EscapeMonitor {
    /// Decomposes the Hessian at the problem's known saddle.
    pub fn from_problem(problem: &ObjectiveProblem, delta: f64) -> Result<Self> {
        if !(delta > 0.0 && delta.is_finite()) {
            return Err(Error::param("delta", format!("must be positive, got {delta}")));
        }
        let saddle = problem
            .known_saddle()
            .ok_or_else(|| Error::CannotInstrument(format!("{} has no known saddle", problem.name())))?
            .clone();
        let h = problem
            .hessian(&saddle)
            .map_err(|e| Error::CannotInstrument(format!("no Hessian at the saddle: {e}")))?;
        let decomp = eigh(&h)?;
        let lambda = decomp.eigenvalues()[0];
        if !(lambda < 0.0) {
            return Err(Error::CannotInstrument(format!(
                "smallest Hessian eigenvalue {lambda} at the saddle is not negative"
            )));
        }
        Ok(Self {
            saddle,
            direction: decomp.eigenvectors().column(0).into_owned(),
            gamma: -lambda,
            delta,
        })
    }

    pub fn coordinate(&self, x: &DenseVector) -> f64 {
        (x - &self.saddle).dot(&self.direction)
    }

    pub fn escaped(&self, x: &DenseVector) -> bool {
        self.coordinate(x).abs() >= self.delta
    }
}

/// First-passage bookkeeping for one run.
#[derive(Clone, Debug, PartialEq)]
pub struct EscapeRecord {
    pub saddle: DenseVector,
    pub direction: DenseVector,
    /// `|y₀|`.
    pub initial_offset: f64,
    pub gamma: f64,
    pub delta: f64,
    /// First `k` with `|y_k| ≥ δ`.
    pub escape_iteration: Option<usize>,
    /// Mean step size over the steps before escape (the whole run if none).
    pub mean_eta: Option<f64>,
    /// `(1/(η̄γ)) ln(δ/|y₀|)`.
    pub predicted: Option<f64>,
}

/// Closed-form escape prediction `(1/(ηγ)) ln(δ/|y₀|)`.
pub fn predicted_escape_time(eta: f64, gamma: f64, delta: f64, y0: f64) -> f64 {
    (delta / y0.abs()).ln() / (eta * gamma)
}

/// Scans a trace's iterate snapshots for the first passage `|y_k| ≥ δ`.
///
/// Requires snapshots at every iteration: a coarser stride could skip the
/// true first passage.
pub fn detect_escape(trace: &RunTrace, problem: &ObjectiveProblem, delta: f64) -> Result<EscapeRecord> {
    match trace.meta.snapshot_stride {
        Some(1) => {}
        Some(s) => {
            return Err(Error::CannotInstrument(format!(
                "snapshot stride {s} can alias the first passage; record every iterate"
            )))
        }
        None => return Err(Error::CannotInstrument("trace has no iterate snapshots".into())),
    }
    let monitor = EscapeMonitor::from_problem(problem, delta)?;
    let (_, x0) = trace
        .iterates
        .first()
        .ok_or_else(|| Error::CannotInstrument("trace has no iterate snapshots".into()))?;
    let escape_iteration = trace
        .iterates
        .iter()
        .find(|(_, x)| monitor.escaped(x))
        .map(|(k, _)| *k);
    let horizon = escape_iteration.unwrap_or(usize::MAX);
    let etas: Vec<f64> = trace
        .rows
        .iter()
        .filter(|r| r.iter < horizon)
        .filter_map(|r| r.eta)
        .collect();
    let mean_eta = (!etas.is_empty()).then(|| etas.iter().sum::<f64>() / etas.len() as f64);
    let initial_offset = monitor.coordinate(x0).abs();
    let predicted = mean_eta
        .filter(|_| initial_offset > 0.0)
        .map(|eta| predicted_escape_time(eta, monitor.gamma, delta, initial_offset));
    Ok(EscapeRecord {
        initial_offset,
        escape_iteration,
        mean_eta,
        predicted,
        saddle: monitor.saddle,
        direction: monitor.direction,
        gamma: monitor.gamma,
        delta,
    })
}

/// How the loss-threshold detector sets its bar.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum LossThreshold {
    /// First `k` with `f_k < level`.
    Absolute(f64),
    /// First `k` with `f_k - f_ref ≤ fraction · (f_0 - f_ref)`.
    RelativeExcess { reference: f64, fraction: f64 },
}

impl LossThreshold {
    /// Level the loss must reach given the initial value `f0`.
    pub fn level(&self, f0: f64) -> f64 {
        match *self {
            LossThreshold::Absolute(level) => level,
            LossThreshold::RelativeExcess { reference, fraction } => reference + fraction * (f0 - reference),
        }
    }
}

/// First index at which the loss series meets the threshold.
pub fn loss_threshold_escape(values: &[f64], threshold: LossThreshold) -> Option<usize> {
    let f0 = *values.first()?;
    let level = threshold.level(f0);
    values.iter().position(|&f| match threshold {
        LossThreshold::Absolute(_) => f < level,
        LossThreshold::RelativeExcess { .. } => f <= level,
    })
}
