//! Per-iteration run records and their on-disk format.
//!
//! A trace saved at `run.csv` occupies up to three files:
//!
//! - `run.csv`: header `iter,f,grad_norm,eta,entropy,noise_active,preservation_ratio`,
//!   one row per iterate. Empty cells mark mechanisms that did not run.
//! - `run.json`: metadata (schema version, seed, method configuration,
//!   problem, status).
//! - `run.iterates.csv`: iterate snapshots, `iter,x0,x1,...`, when recorded.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::DenseVector;

pub const TRACE_SCHEMA_VERSION: u32 = 1;

pub const TRACE_HEADER: [&str; 7] = [
    "iter",
    "f",
    "grad_norm",
    "eta",
    "entropy",
    "noise_active",
    "preservation_ratio",
];

/// State at iterate `x_k` plus what the step leaving it did. The final row of
/// a trace has no step, so its step fields are empty.
#[derive(Clone, Debug, PartialEq)]
pub struct TraceRow {
    pub iter: usize,
    pub f: f64,
    pub grad_norm: f64,
    pub eta: Option<f64>,
    pub entropy: Option<f64>,
    pub noise_active: Option<bool>,
    pub preservation_ratio: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProblemInfo {
    pub name: String,
    pub dimension: usize,
    /// Value the loss-threshold detector measures excess against.
    pub reference_value: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RunStatus {
    /// Ran the full iteration budget.
    Completed,
    /// A stop rule fired at the last recorded iterate.
    Stopped { rule: String },
    /// The step leaving the last recorded iterate failed.
    Diverged { iteration: usize, reason: String },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceMeta {
    pub schema_version: u32,
    pub seed: u64,
    /// Selector name of the update rule.
    pub method: String,
    /// Full configuration of the update rule.
    pub config: serde_json::Value,
    pub problem: ProblemInfo,
    pub max_iters: usize,
    pub snapshot_stride: Option<usize>,
    pub status: RunStatus,
    pub rows: usize,
}

/// Recorded run: metadata, one row per iterate `x_0 .. x_K`, optional
/// iterate snapshots.
#[derive(Clone, Debug, PartialEq)]
pub struct RunTrace {
    pub meta: TraceMeta,
    pub rows: Vec<TraceRow>,
    /// `(k, x_k)` for every `k` divisible by the snapshot stride.
    pub iterates: Vec<(usize, DenseVector)>,
}

impl RunTrace {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn values(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.f).collect()
    }

    pub fn final_value(&self) -> Option<f64> {
        self.rows.last().map(|r| r.f)
    }

    /// Steps whose entropy gate was evaluated.
    pub fn gated_steps(&self) -> usize {
        self.rows.iter().filter(|r| r.noise_active.is_some()).count()
    }

    /// Fraction ν of gated steps on which noise fired; `None` when no step
    /// was gated.
    pub fn activation_fraction(&self) -> Option<f64> {
        let gated = self.gated_steps();
        let active = self.rows.iter().filter(|r| r.noise_active == Some(true)).count();
        (gated > 0).then(|| active as f64 / gated as f64)
    }
}

fn sidecar_paths(path: &Path) -> (PathBuf, PathBuf) {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let dir = path.parent().unwrap_or(Path::new(""));
    (dir.join(format!("{stem}.json")), dir.join(format!("{stem}.iterates.csv")))
}

fn cell(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Writes the trace files next to `path`. Floats use shortest round-trip
/// formatting, so reloading is exact.
pub fn save_trace(trace: &RunTrace, path: &Path) -> Result<()> {
    if trace.meta.rows != trace.rows.len() {
        return Err(Error::schema(path, "row count in metadata disagrees with rows"));
    }
    let (meta_path, iter_path) = sidecar_paths(path);
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
    w.write_record(TRACE_HEADER).map_err(|e| csv_error(path, e))?;
    for r in &trace.rows {
        w.write_record([
            r.iter.to_string(),
            r.f.to_string(),
            r.grad_norm.to_string(),
            cell(r.eta),
            cell(r.entropy),
            r.noise_active.map(|b| u8::from(b).to_string()).unwrap_or_default(),
            cell(r.preservation_ratio),
        ])
        .map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;

    let json = serde_json::to_string_pretty(&trace.meta).map_err(|e| Error::schema(&meta_path, e.to_string()))?;
    fs::write(&meta_path, json + "\n").map_err(|e| Error::io(&meta_path, e))?;

    if trace.iterates.is_empty() {
        if iter_path.exists() {
            fs::remove_file(&iter_path).map_err(|e| Error::io(&iter_path, e))?;
        }
        return Ok(());
    }
    let n = trace.meta.problem.dimension;
    let mut w = csv::Writer::from_path(&iter_path).map_err(|e| csv_error(&iter_path, e))?;
    let header: Vec<String> = std::iter::once("iter".to_string())
        .chain((0..n).map(|i| format!("x{i}")))
        .collect();
    w.write_record(&header).map_err(|e| csv_error(&iter_path, e))?;
    for (k, x) in &trace.iterates {
        let rec: Vec<String> = std::iter::once(k.to_string())
            .chain(x.iter().map(|v| v.to_string()))
            .collect();
        w.write_record(&rec).map_err(|e| csv_error(&iter_path, e))?;
    }
    w.flush().map_err(|e| Error::io(&iter_path, e))
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    if e.is_io_error() {
        match e.into_kind() {
            csv::ErrorKind::Io(io) => Error::io(path, io),
            _ => unreachable!(),
        }
    } else {
        Error::schema(path, e.to_string())
    }
}

fn parse_opt<T: std::str::FromStr>(path: &Path, s: &str, column: &str) -> Result<Option<T>> {
    if s.is_empty() {
        return Ok(None);
    }
    s.parse()
        .map(Some)
        .map_err(|_| Error::schema(path, format!("bad value {s:?} in column {column}")))
}

fn parse_req<T: std::str::FromStr>(path: &Path, s: &str, column: &str) -> Result<T> {
    parse_opt(path, s, column)?.ok_or_else(|| Error::schema(path, format!("missing value in column {column}")))
}

/// Reads a trace written by [`save_trace`]. Version mismatches, malformed
/// cells and row-count disagreements are schema errors.
pub fn load_trace(path: &Path) -> Result<RunTrace> {
    let (meta_path, iter_path) = sidecar_paths(path);
    let text = fs::read_to_string(&meta_path).map_err(|e| Error::io(&meta_path, e))?;
    let meta: TraceMeta = serde_json::from_str(&text).map_err(|e| Error::schema(&meta_path, e.to_string()))?;
    if meta.schema_version != TRACE_SCHEMA_VERSION {
        return Err(Error::schema(
            &meta_path,
            format!(
                "schema version {} (expected {TRACE_SCHEMA_VERSION})",
                meta.schema_version
            ),
        ));
    }

    let mut r = csv::Reader::from_path(path).map_err(|e| csv_error(path, e))?;
    let header = r.headers().map_err(|e| csv_error(path, e))?;
    if header.iter().ne(TRACE_HEADER) {
        return Err(Error::schema(path, "unexpected header"));
    }
    let mut rows = Vec::with_capacity(meta.rows);
    for rec in r.records() {
        let rec = rec.map_err(|e| csv_error(path, e))?;
        if rec.len() != TRACE_HEADER.len() {
            return Err(Error::schema(path, format!("row with {} fields", rec.len())));
        }
        let noise_active = match &rec[5] {
            "" => None,
            "0" => Some(false),
            "1" => Some(true),
            other => return Err(Error::schema(path, format!("bad noise_active {other:?}"))),
        };
        rows.push(TraceRow {
            iter: parse_req(path, &rec[0], "iter")?,
            f: parse_req(path, &rec[1], "f")?,
            grad_norm: parse_req(path, &rec[2], "grad_norm")?,
            eta: parse_opt(path, &rec[3], "eta")?,
            entropy: parse_opt(path, &rec[4], "entropy")?,
            noise_active,
            preservation_ratio: parse_opt(path, &rec[6], "preservation_ratio")?,
        });
    }
    if rows.len() != meta.rows {
        return Err(Error::schema(
            path,
            format!("expected {} rows, found {}", meta.rows, rows.len()),
        ));
    }

    let mut iterates = Vec::new();
    if meta.snapshot_stride.is_some() && iter_path.exists() {
        let n = meta.problem.dimension;
        let mut r = csv::Reader::from_path(&iter_path).map_err(|e| csv_error(&iter_path, e))?;
        for rec in r.records() {
            let rec = rec.map_err(|e| csv_error(&iter_path, e))?;
            if rec.len() != n + 1 {
                return Err(Error::schema(&iter_path, format!("row with {} fields", rec.len())));
            }
            let k = parse_req(&iter_path, &rec[0], "iter")?;
            let mut x = DenseVector::zeros(n);
            for i in 0..n {
                x[i] = parse_req(&iter_path, &rec[i + 1], "x")?;
            }
            iterates.push((k, x));
        }
        let stride = meta.snapshot_stride.unwrap_or(1);
        let expected = meta.rows.div_ceil(stride);
        if iterates.len() != expected {
            return Err(Error::schema(
                &iter_path,
                format!("expected {expected} snapshots, found {}", iterates.len()),
            ));
        }
    }
    Ok(RunTrace { meta, rows, iterates })
}
