//! Monte-Carlo escape-time scaling with problem dimension.

use rayon::prelude::*;

use super::escape::EscapeMonitor;
use super::metrics::median;
use super::run::{run_method, RunOptions, StopRule};
use super::trace::RunStatus;
use crate::error::{Error, Result};
use crate::optimizers::Method;
use crate::problem::ObjectiveProblem;
use crate::rng::RngStream;

pub type ProblemFamily<'a> = dyn Fn(usize) -> Result<ObjectiveProblem> + Sync + 'a;
pub type DimensionRule<'a> = dyn Fn(usize) -> f64 + Sync + 'a;

/// Noisy gradient descent started exactly at each problem's known saddle.
pub struct ScalingSetup<'a> {
    pub family: &'a ProblemFamily<'a>,
    pub eta_rule: &'a DimensionRule<'a>,
    pub sigma_rule: &'a DimensionRule<'a>,
    pub dims: Vec<usize>,
    pub seeds: usize,
    pub base_seed: u64,
    pub max_iters: usize,
    pub delta: f64,
    /// Bootstrap resamples for the slope interval.
    pub bootstrap: usize,
}

pub const MIN_SCALING_SEEDS: usize = 30;

#[derive(Clone, Debug, PartialEq)]
pub struct ScalingRow {
    pub n: usize,
    pub eta: f64,
    pub sigma: f64,
    /// Escape iteration per seed, `None` when the run never escaped.
    pub times: Vec<Option<usize>>,
    /// Median with non-escaping runs counted as infinite.
    pub median: Option<f64>,
    /// Excluded from the fit.
    pub censored: bool,
}

impl ScalingRow {
    pub fn escaped(&self) -> usize {
        self.times.iter().filter(|t| t.is_some()).count()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScalingResult {
    pub rows: Vec<ScalingRow>,
    /// Least-squares slope of `ln median` against `ln n`.
    pub slope: Option<f64>,
    /// 95% percentile bootstrap interval for the slope.
    pub interval: Option<(f64, f64)>,
    pub warnings: Vec<String>,
}

/// Ordinary least-squares slope through `(x, y)` pairs; `None` for fewer than
/// two distinct `x`.
pub fn least_squares_slope(points: &[(f64, f64)]) -> Option<f64> {
    let n = points.len() as f64;
    if points.len() < 2 {
        return None;
    }
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    Some(sxy / sxx)
}

fn median_time(times: &[Option<usize>]) -> Option<f64> {
    let t: Vec<f64> = times.iter().map(|t| t.map_or(f64::INFINITY, |v| v as f64)).collect();
    median(&t).filter(|m| m.is_finite())
}

fn log_points(rows: &[(usize, f64)]) -> Vec<(f64, f64)> {
    rows.iter().map(|&(n, m)| ((n as f64).ln(), m.ln())).collect()
}

/// Runs every (dimension, seed) pair, takes per-dimension medians and fits
/// the log-log slope.
///
/// A dimension where no run escaped, or where the median is not reached, is
/// censored: it stays in the table, is left out of the fit and produces a
/// warning.
pub fn escape_time_scaling(setup: &ScalingSetup) -> Result<ScalingResult> {
    if setup.seeds < MIN_SCALING_SEEDS {
        return Err(Error::param(
            "seeds",
            format!("need at least {MIN_SCALING_SEEDS} seeds per dimension"),
        ));
    }
    if setup.dims.is_empty() || setup.dims.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::param("dims", "need strictly increasing dimensions"));
    }
    let mut prepared = Vec::new();
    for &n in &setup.dims {
        let problem = (setup.family)(n)?;
        if problem.dimension() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                actual: problem.dimension(),
            });
        }
        let monitor = EscapeMonitor::from_problem(&problem, setup.delta)?;
        let method = Method::NoisyGd {
            eta: (setup.eta_rule)(n),
            sigma: (setup.sigma_rule)(n),
        };
        prepared.push((problem, monitor, method));
    }
    let root = RngStream::new(setup.base_seed);
    let jobs: Vec<(usize, usize)> = (0..setup.dims.len())
        .flat_map(|d| (0..setup.seeds).map(move |s| (d, s)))
        .collect();
    let times: Vec<Option<usize>> = jobs
        .par_iter()
        .map(|&(d, s)| {
            let (problem, monitor, method) = &prepared[d];
            let options = RunOptions::new(setup.max_iters).stop_when(StopRule::Escape(monitor.clone()));
            let rng = root.split(((d as u64) << 32) | s as u64);
            let outcome = run_method(problem, method, &monitor.saddle, s as u64, rng, &options)?;
            Ok(match outcome.trace.meta.status {
                RunStatus::Stopped { .. } => outcome.trace.rows.last().map(|r| r.iter),
                _ => None,
            })
        })
        .collect::<Result<_>>()?;

    let mut rows = Vec::new();
    let mut warnings = Vec::new();
    for (d, (problem, _, method)) in prepared.iter().enumerate() {
        let t = times[d * setup.seeds..(d + 1) * setup.seeds].to_vec();
        let med = median_time(&t);
        let escaped = t.iter().filter(|v| v.is_some()).count();
        let censored = med.is_none();
        if censored {
            warnings.push(format!(
                "n = {}: {escaped} of {} runs escaped within {} iterations; excluded from the fit",
                problem.dimension(),
                setup.seeds,
                setup.max_iters
            ));
        }
        let (eta, sigma) = match method {
            Method::NoisyGd { eta, sigma } => (*eta, *sigma),
            _ => unreachable!(),
        };
        rows.push(ScalingRow {
            n: problem.dimension(),
            eta,
            sigma,
            times: t,
            median: med,
            censored,
        });
    }

    let fit_rows: Vec<(usize, f64)> = rows.iter().filter_map(|r| Some((r.n, r.median?))).collect();
    let slope = least_squares_slope(&log_points(&fit_rows));
    if slope.is_none() {
        warnings.push("fewer than two uncensored dimensions; slope undefined".into());
    }
    let interval = slope.and_then(|_| bootstrap_interval(&rows, setup));
    Ok(ScalingResult {
        rows,
        slope,
        interval,
        warnings,
    })
}

fn bootstrap_interval(rows: &[ScalingRow], setup: &ScalingSetup) -> Option<(f64, f64)> {
    if setup.bootstrap == 0 {
        return None;
    }
    let live: Vec<&ScalingRow> = rows.iter().filter(|r| !r.censored).collect();
    let mut rng = RngStream::new(setup.base_seed).split(u64::MAX);
    let mut slopes = Vec::with_capacity(setup.bootstrap);
    for _ in 0..setup.bootstrap {
        let mut pts = Vec::new();
        for r in &live {
            let len = r.times.len();
            let sample: Vec<Option<usize>> = (0..len)
                .map(|_| r.times[((rng.uniform() * len as f64) as usize).min(len - 1)])
                .collect();
            if let Some(m) = median_time(&sample) {
                pts.push((r.n, m));
            }
        }
        if let Some(s) = least_squares_slope(&log_points(&pts)) {
            slopes.push(s);
        }
    }
    if slopes.is_empty() {
        return None;
    }
    slopes.sort_by(f64::total_cmp);
    let pick = |q: f64| slopes[((q * (slopes.len() - 1) as f64).round() as usize).min(slopes.len() - 1)];
    Some((pick(0.025), pick(0.975)))
}
