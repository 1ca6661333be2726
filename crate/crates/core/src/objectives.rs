//! Benchmark problems: chained Rosenbrock, diagonal quadratic saddles,
//! ℓ1-regularized logistic regression and the 1-D `eˣ sin x`.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::problem::ObjectiveProblem;
use crate::rng::RngStream;
use crate::{DenseMatrix, DenseVector};

/// Default smoothing `μ` of `|w| ≈ √(w² + μ²)` in the logistic objective.
pub const DEFAULT_L1_SMOOTHING: f64 = 1e-4;

/// Chained Rosenbrock `Σ 100(x_{i+1} − x_i²)² + (1 − x_i)²` with minimum at all-ones.
pub fn make_rosenbrock(n: usize) -> Result<ObjectiveProblem> {
    if n < 2 {
        return Err(Error::InvalidDimension(format!("rosenbrock needs n >= 2, got {n}")));
    }
    let value = |x: &DenseVector| {
        x.as_slice()
            .windows(2)
            .map(|w| 100.0 * (w[1] - w[0] * w[0]).powi(2) + (1.0 - w[0]).powi(2))
            .sum()
    };
    let gradient = |x: &DenseVector| {
        let mut g = DenseVector::zeros(x.len());
        for i in 0..x.len() - 1 {
            let t = x[i + 1] - x[i] * x[i];
            g[i] += -400.0 * x[i] * t - 2.0 * (1.0 - x[i]);
            g[i + 1] += 200.0 * t;
        }
        g
    };
    Ok(ObjectiveProblem::new(format!("rosenbrock-{n}"), n, value, gradient)?
        .with_known_minimum(DenseVector::from_element(n, 1.0)))
}

/// `Q = diag(−I_k, I_{n−k})`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuadraticSaddleSpec {
    pub n: usize,
    pub k: usize,
}

impl QuadraticSaddleSpec {
    pub fn validate(&self) -> Result<()> {
        if self.k == 0 || self.k >= self.n {
            return Err(Error::InvalidSpec(format!(
                "quadratic saddle needs 1 <= k < n, got n={} k={}",
                self.n, self.k
            )));
        }
        Ok(())
    }
}

/// `f(x) = ½ xᵀQx` with `Q = diag(−I_k, I_{n−k})`; strict saddle at the origin.
pub fn make_quadratic_saddle(spec: QuadraticSaddleSpec) -> Result<ObjectiveProblem> {
    make_scaled_saddle(spec, 1.0)
}

/// Quadratic saddle with unstable curvature `−γ`: `Q = diag(−γ I_k, I_{n−k})`.
pub fn make_scaled_saddle(spec: QuadraticSaddleSpec, gamma: f64) -> Result<ObjectiveProblem> {
    spec.validate()?;
    if !(gamma > 0.0) {
        return Err(Error::param("gamma", "must be positive"));
    }
    let diag: Vec<f64> = (0..spec.n).map(|i| if i < spec.k { -gamma } else { 1.0 }).collect();
    let name = if gamma == 1.0 {
        format!("quadratic-saddle-{}-{}", spec.n, spec.k)
    } else {
        format!("quadratic-saddle-{}-{}-g{gamma}", spec.n, spec.k)
    };
    make_diagonal_quadratic(name, diag)
}

/// `f(x) = ½ Σ dᵢ xᵢ²` with exact Hessian `diag(d)`. The origin is registered
/// as the known minimum when every `dᵢ > 0` and as the known saddle when the
/// spectrum has mixed signs and no zeros.
pub fn make_diagonal_quadratic(name: impl Into<String>, diag: Vec<f64>) -> Result<ObjectiveProblem> {
    let n = diag.len();
    if n == 0 {
        return Err(Error::InvalidDimension("empty spectrum".into()));
    }
    if diag.iter().any(|d| !d.is_finite()) {
        return Err(Error::InvalidSpec("spectrum must be finite".into()));
    }
    let lipschitz = diag.iter().fold(0.0_f64, |m, d| m.max(d.abs()));
    let d = DenseVector::from_vec(diag);
    let (dv, dg, dh) = (d.clone(), d.clone(), d.clone());
    let mut problem = ObjectiveProblem::new(
        name,
        n,
        move |x| 0.5 * x.iter().zip(dv.iter()).map(|(xi, di)| di * xi * xi).sum::<f64>(),
        move |x| x.component_mul(&dg),
        )?
    .with_hessian(move |_| DenseMatrix::from_diagonal(&dh));
    if lipschitz > 0.0 {
        problem = problem.with_lipschitz_hint(lipschitz);
    }
    let origin = DenseVector::zeros(n);
    if d.iter().all(|&v| v > 0.0) {
        problem = problem.with_known_minimum(origin);
    } else if d.iter().all(|&v| v != 0.0) && d.iter().any(|&v| v < 0.0) && d.iter().any(|&v| v > 0.0) {
        problem = problem.with_known_saddle(origin);
    }
    Ok(problem)
}

/// Data and weights for `(1/m) Σ log(1 + exp(−yᵢ wᵀxᵢ)) + λ Σ √(w_j² + μ²)`.
#[derive(Clone, Debug, PartialEq)]
pub struct LogisticRegressionSpec {
    /// `m × n`, one sample per row.
    pub features: DenseMatrix,
    /// `±1` per sample.
    pub labels: Vec<f64>,
    pub l1_weight: f64,
    pub l1_smoothing: f64,
}

impl LogisticRegressionSpec {
    pub fn sample_count(&self) -> usize {
        self.features.nrows()
    }

    pub fn dimension(&self) -> usize {
        self.features.ncols()
    }

    pub fn validate(&self) -> Result<()> {
        if self.features.nrows() == 0 || self.features.ncols() == 0 {
            return Err(Error::InvalidSpec("logistic regression needs a non-empty dataset".into()));
        }
        if self.labels.len() != self.features.nrows() {
            return Err(Error::InvalidSpec(format!(
                "{} labels for {} samples",
                self.labels.len(),
                self.features.nrows()
            )));
        }
        if self.labels.iter().any(|&y| y != 1.0 && y != -1.0) {
            return Err(Error::InvalidSpec("labels must be +1 or -1".into()));
        }
        if !(self.l1_weight >= 0.0) {
            return Err(Error::InvalidSpec("l1 weight must be >= 0".into()));
        }
        if !(self.l1_smoothing > 0.0) {
            return Err(Error::InvalidSpec("l1 smoothing must be > 0".into()));
        }
        Ok(())
    }

    /// Standard-normal features, a ground-truth weight with `support` fraction
    /// of nonzero `±1` entries, and labels drawn from the logistic model.
    pub fn synthetic(m: usize, n: usize, support: f64, l1_weight: f64, rng: &mut RngStream) -> Result<Self> {
        if m == 0 || n == 0 {
            return Err(Error::InvalidSpec("synthetic dataset must be non-empty".into()));
        }
        let nnz = ((support * n as f64).round() as usize).clamp(1, n);
        let mut truth = DenseVector::zeros(n);
        // Partial Fisher-Yates to pick the support.
        let mut idx: Vec<usize> = (0..n).collect();
        for j in 0..nnz {
            let pick = j + ((rng.uniform() * (n - j) as f64) as usize).min(n - j - 1);
            idx.swap(j, pick);
            truth[idx[j]] = if rng.uniform() < 0.5 { -1.0 } else { 1.0 };
        }
        let features = DenseMatrix::from_fn(m, n, |_, _| rng.standard_normal());
        let labels = (0..m)
            .map(|i| {
                let z = features.row(i).transpose().dot(&truth);
                if rng.uniform() < sigmoid(z) {
                    1.0
                } else {
                    -1.0
                }
            })
            .collect();
        Ok(Self {
            features,
            labels,
            l1_weight,
            l1_smoothing: DEFAULT_L1_SMOOTHING,
        })
    }

    /// One row per sample, label in the last column, no header.
    pub fn save_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::WriterBuilder::new()
            .has_headers(false)
            .from_path(path)
            .map_err(|e| csv_err(path, e))?;
        for (i, row) in self.features.row_iter().enumerate() {
            let mut rec: Vec<String> = row.iter().map(|v| v.to_string()).collect();
            rec.push(self.labels[i].to_string());
            w.write_record(&rec).map_err(|e| csv_err(path, e))?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }

    pub fn load_csv(path: &Path, l1_weight: f64, l1_smoothing: f64) -> Result<Self> {
        let mut r = csv::ReaderBuilder::new()
            .has_headers(false)
            .from_path(path)
            .map_err(|e| csv_err(path, e))?;
        let mut data = Vec::new();
        let mut labels = Vec::new();
        let mut width = None;
        for rec in r.records() {
            let rec = rec.map_err(|e| csv_err(path, e))?;
            let vals: Vec<f64> = rec
                .iter()
                .map(|s| s.trim().parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::schema(path, e.to_string()))?;
            if vals.len() < 2 {
                return Err(Error::schema(path, "each row needs at least one feature and a label"));
            }
            if *width.get_or_insert(vals.len()) != vals.len() {
                return Err(Error::schema(path, "ragged rows"));
            }
            let (label, feats) = vals.split_last().unwrap();
            labels.push(*label);
            data.extend_from_slice(feats);
        }
        let n = width.map(|w| w - 1).unwrap_or(0);
        let spec = Self {
            features: DenseMatrix::from_row_slice(labels.len(), n, &data),
            labels,
            l1_weight,
            l1_smoothing,
        };
        spec.validate()?;
        Ok(spec)
    }
}

fn csv_err(path: &Path, e: csv::Error) -> Error {
    if e.is_io_error() {
        match e.into_kind() {
            csv::ErrorKind::Io(io) => Error::io(path, io),
            _ => unreachable!(),
        }
    } else {
        Error::schema(path, e.to_string())
    }
}

fn sigmoid(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

/// `log(1 + eᵗ)` without overflow.
fn softplus(t: f64) -> f64 {
    t.max(0.0) + (-t.abs()).exp().ln_1p()
}

/// Smoothed ℓ1-regularized logistic loss. The Hessian falls back to finite
/// differences of the gradient.
pub fn make_logistic(spec: LogisticRegressionSpec) -> Result<ObjectiveProblem> {
    spec.validate()?;
    let n = spec.dimension();
    let m = spec.sample_count() as f64;
    let spec = std::sync::Arc::new(spec);
    let sv = spec.clone();
    let value = move |w: &DenseVector| {
        let z = &sv.features * w;
        let loss: f64 = z.iter().zip(&sv.labels).map(|(zi, yi)| softplus(-yi * zi)).sum::<f64>() / m;
        let mu2 = sv.l1_smoothing * sv.l1_smoothing;
        loss + sv.l1_weight * w.iter().map(|wj| (wj * wj + mu2).sqrt()).sum::<f64>()
    };
    let gradient = move |w: &DenseVector| {
        let z = &spec.features * w;
        let coeff = DenseVector::from_iterator(
            z.len(),
            z.iter().zip(&spec.labels).map(|(zi, yi)| -yi * sigmoid(-yi * zi) / m),
        );
        let mut g = spec.features.tr_mul(&coeff);
        let mu2 = spec.l1_smoothing * spec.l1_smoothing;
        for (gj, wj) in g.iter_mut().zip(w.iter()) {
            *gj += spec.l1_weight * wj / (wj * wj + mu2).sqrt();
        }
        g
    };
    ObjectiveProblem::new(format!("logistic-{n}"), n, value, gradient)
}

/// `f(x) = eˣ sin x`.
pub fn make_expsin() -> ObjectiveProblem {
    ObjectiveProblem::new(
        "expsin",
        1,
        |x| x[0].exp() * x[0].sin(),
        |x| DenseVector::from_element(1, x[0].exp() * (x[0].sin() + x[0].cos())),
    )
    .expect("dimension 1 is valid")
    .with_hessian(|x| DenseMatrix::from_element(1, 1, 2.0 * x[0].exp() * x[0].cos()))
}
