//! Escape detection, convergence metrics, run recording and persistence.
//!
//! Steppers never decide whether a run has escaped; everything measured about
//! a run is computed here from its trace or, for long Monte-Carlo sweeps, by
//! an [`EscapeMonitor`] stop rule evaluated at every iterate.

mod escape;
mod metrics;
mod run;
mod scaling;
mod trace;

pub use escape::{detect_escape, loss_threshold_escape, predicted_escape_time, EscapeMonitor, EscapeRecord, LossThreshold};
pub use metrics::{
    aggregate, convergence_rate, median, CENSORED, read_summary, summarize_run, summary_threshold, write_summary, RunSummary,
    SummaryRow, RATE_FLOOR, SUMMARY_HEADER,
};
pub use run::{run_method, RunOptions, RunOutcome, StopRule};
pub use scaling::{
    escape_time_scaling, least_squares_slope, DimensionRule, ProblemFamily, ScalingResult, ScalingRow, ScalingSetup,
    MIN_SCALING_SEEDS,
};
pub use trace::{
    load_trace, save_trace, ProblemInfo, RunStatus, RunTrace, TraceMeta, TraceRow, TRACE_HEADER, TRACE_SCHEMA_VERSION,
};

use crate::optimizers::NoiseAccounting;

/// Noise bookkeeping over a trace's gated steps for an `n`-dimensional run
/// with noise scale `sigma`.
pub fn noise_accounting(trace: &RunTrace, sigma: f64) -> NoiseAccounting {
    NoiseAccounting::tally(
        trace.meta.problem.dimension,
        sigma,
        trace
            .rows
            .iter()
            .filter_map(|r| Some((r.noise_active?, r.eta.unwrap_or(0.0)))),
    )
}
