//! Convergence-rate metric and run summary tables.

use std::collections::BTreeMap;
use std::path::Path;

use super::escape::{loss_threshold_escape, LossThreshold};
use super::trace::RunTrace;
use crate::error::{Error, Result};

/// Gaps `f_k - f_inf` at or below this are treated as converged.
pub const RATE_FLOOR: f64 = 1e-15;

/// Average per-step relative loss reduction over `k ≥ after`.
///
/// Each step contributes the contraction `c_k = (f_{k+1} - f_inf) / (f_k - f_inf)`
/// and the result is `1 - (Π c_k)^{1/N}`, so geometric decay `f_k = r^k` gives
/// exactly `1 - r`. Steps whose gap is at or below [`RATE_FLOOR`] on either
/// side carry no ratio and are skipped. `f_inf` defaults to the smallest value
/// in the series. A series with no usable step has rate 0.
pub fn convergence_rate(values: &[f64], after: usize, f_inf: Option<f64>) -> Result<f64> {
    if values.len() <= after {
        return Err(Error::param(
            "after",
            format!("iteration {after} is beyond a series of length {}", values.len()),
        ));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("loss series"));
    }
    let f_inf = f_inf.unwrap_or_else(|| values.iter().copied().fold(f64::INFINITY, f64::min));
    let mut log_sum = 0.0;
    let mut count = 0usize;
    for w in values[after..].windows(2) {
        let (a, b) = (w[0] - f_inf, w[1] - f_inf);
        if a > RATE_FLOOR && b > RATE_FLOOR {
            log_sum += (b / a).ln();
            count += 1;
        }
    }
    if count == 0 {
        return Ok(0.0);
    }
    Ok(1.0 - (log_sum / count as f64).exp())
}

/// One run's contribution to a summary table.
#[derive(Clone, Debug, PartialEq)]
pub struct RunSummary {
    pub problem: String,
    pub method: String,
    pub seed: u64,
    /// Loss-threshold escape iteration.
    pub escape_time: Option<usize>,
    pub final_loss: f64,
    pub convergence_rate: f64,
}

/// Escape threshold used for summaries: excess reduced to 1% of its initial
/// value when the trace has a reference value, else loss below `1e-2`.
pub fn summary_threshold(trace: &RunTrace) -> LossThreshold {
    match trace.meta.problem.reference_value {
        Some(reference) => LossThreshold::RelativeExcess {
            reference,
            fraction: 1e-2,
        },
        None => LossThreshold::Absolute(1e-2),
    }
}

pub fn summarize_run(trace: &RunTrace) -> Result<RunSummary> {
    let values = trace.values();
    let final_loss = *values.last().ok_or_else(|| Error::param("trace", "trace has no rows"))?;
    let finite_len = values.iter().position(|v| !v.is_finite()).unwrap_or(values.len());
    let escape_time = loss_threshold_escape(&values[..finite_len], summary_threshold(trace));
    let after = escape_time.unwrap_or(0);
    let convergence_rate = if finite_len > after {
        convergence_rate(&values[..finite_len], after, trace.meta.problem.reference_value)?
    } else {
        0.0
    };
    Ok(RunSummary {
        problem: trace.meta.problem.name.clone(),
        method: trace.meta.method.clone(),
        seed: trace.meta.seed,
        escape_time,
        final_loss,
        convergence_rate,
    })
}

/// Per (problem, method) aggregate over seeds.
#[derive(Clone, Debug, PartialEq)]
pub struct SummaryRow {
    pub problem: String,
    pub method: String,
    pub runs: usize,
    pub escaped: usize,
    /// Median loss-threshold escape iteration over all runs, non-escaping
    /// runs counted as never escaping. `None` when fewer than half escaped.
    pub escape_time: Option<f64>,
    /// Median final loss.
    pub final_loss: f64,
    /// Mean per-run convergence rate.
    pub convergence_rate: f64,
}

pub const SUMMARY_HEADER: [&str; 7] = [
    "problem",
    "method",
    "runs",
    "escaped",
    "escape_time_epochs",
    "final_loss",
    "avg_convergence_rate",
];

/// Escape-time cell for a group whose median run never escaped.
pub const CENSORED: &str = "censored";

/// Median of finite values; `None` for an empty slice.
pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    Some(if v.len() % 2 == 1 { v[m] } else { 0.5 * (v[m - 1] + v[m]) })
}

/// Groups run summaries by (problem, method) in sorted order. Runs are sorted
/// by seed inside each group, so the result does not depend on input order.
pub fn aggregate(runs: &[RunSummary]) -> Vec<SummaryRow> {
    let mut groups: BTreeMap<(String, String), Vec<&RunSummary>> = BTreeMap::new();
    for r in runs {
        groups.entry((r.problem.clone(), r.method.clone())).or_default().push(r);
    }
    groups
        .into_iter()
        .map(|((problem, method), mut rs)| {
            rs.sort_by_key(|r| r.seed);
            let times: Vec<f64> = rs
                .iter()
                .map(|r| r.escape_time.map_or(f64::INFINITY, |t| t as f64))
                .collect();
            let escape_time = median(&times).filter(|t| t.is_finite());
            let losses: Vec<f64> = rs.iter().map(|r| r.final_loss).collect();
            SummaryRow {
                runs: rs.len(),
                escaped: rs.iter().filter(|r| r.escape_time.is_some()).count(),
                escape_time,
                final_loss: median(&losses).unwrap_or(f64::NAN),
                convergence_rate: rs.iter().map(|r| r.convergence_rate).sum::<f64>() / rs.len() as f64,
                problem,
                method,
            }
        })
        .collect()
}

pub fn write_summary(rows: &[SummaryRow], path: &Path) -> Result<()> {
    let to_err = |e: csv::Error| Error::schema(path, e.to_string());
    let mut w = csv::Writer::from_path(path).map_err(to_err)?;
    w.write_record(SUMMARY_HEADER).map_err(to_err)?;
    for r in rows {
        w.write_record([
            r.problem.clone(),
            r.method.clone(),
            r.runs.to_string(),
            r.escaped.to_string(),
            r.escape_time.map_or_else(|| CENSORED.to_string(), |t| t.to_string()),
            r.final_loss.to_string(),
            r.convergence_rate.to_string(),
        ])
        .map_err(to_err)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_summary(path: &Path) -> Result<Vec<SummaryRow>> {
    let to_err = |e: csv::Error| Error::schema(path, e.to_string());
    let mut r = csv::Reader::from_path(path).map_err(to_err)?;
    if r.headers().map_err(to_err)?.iter().ne(SUMMARY_HEADER) {
        return Err(Error::schema(path, "unexpected header"));
    }
    let num = |s: &str| -> Result<f64> { s.parse().map_err(|_| Error::schema(path, format!("bad number {s:?}"))) };
    let count = |s: &str| -> Result<usize> { s.parse().map_err(|_| Error::schema(path, format!("bad count {s:?}"))) };
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(to_err)?;
        if rec.len() != SUMMARY_HEADER.len() {
            return Err(Error::schema(path, "short row"));
        }
        rows.push(SummaryRow {
            problem: rec[0].to_string(),
            method: rec[1].to_string(),
            runs: count(&rec[2])?,
            escaped: count(&rec[3])?,
            escape_time: if &rec[4] == CENSORED { None } else { Some(num(&rec[4])?) },
            final_loss: num(&rec[5])?,
            convergence_rate: num(&rec[6])?,
        });
    }
    Ok(rows)
}
