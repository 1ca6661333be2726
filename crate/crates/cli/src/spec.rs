//! Experiment and scaling spec files.

use std::path::{Path, PathBuf};

use curvopt::objectives::{
    make_diagonal_quadratic, make_expsin, make_logistic, make_quadratic_saddle, make_rosenbrock, make_scaled_saddle,
    LogisticRegressionSpec, QuadraticSaddleSpec, DEFAULT_L1_SMOOTHING,
};
use curvopt::optimizers::Method;
use curvopt::topopt::{CasdConfig, TopologyProblem};
use curvopt::{DenseVector, ObjectiveProblem, RngStream};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::CliError;

pub const PROBLEM_NAMES: &[&str] = &[
    "rosenbrock",
    "quadratic_saddle",
    "scaled_saddle",
    "diagonal_quadratic",
    "logistic",
    "expsin",
    "cantilever",
    "topology",
];

pub const CASD: &str = "casd";

/// Problem selector plus its parameters.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case", deny_unknown_fields)]
pub enum ProblemSpec {
    Rosenbrock {
        n: usize,
    },
    QuadraticSaddle {
        n: usize,
        k: usize,
    },
    ScaledSaddle {
        n: usize,
        k: usize,
        gamma: f64,
    },
    DiagonalQuadratic {
        diag: Vec<f64>,
    },
    /// Synthetic data drawn from `data_seed`, or rows read from `csv`.
    Logistic {
        #[serde(default = "default_samples")]
        samples: usize,
        #[serde(default = "default_features")]
        features: usize,
        #[serde(default = "default_support")]
        support: f64,
        #[serde(default = "default_l1")]
        l1_weight: f64,
        #[serde(default = "default_smoothing")]
        l1_smoothing: f64,
        #[serde(default)]
        data_seed: u64,
        #[serde(default)]
        csv: Option<PathBuf>,
    },
    Expsin,
    Cantilever {
        nx: usize,
        ny: usize,
        #[serde(default = "default_volume_fraction")]
        volume_fraction: f64,
    },
    Topology(TopologyProblem),
}

fn default_samples() -> usize {
    500
}
fn default_features() -> usize {
    40
}
fn default_support() -> f64 {
    0.1
}
fn default_l1() -> f64 {
    0.01
}
fn default_smoothing() -> f64 {
    DEFAULT_L1_SMOOTHING
}
fn default_volume_fraction() -> f64 {
    0.5
}

pub enum Built {
    Objective(ObjectiveProblem),
    Topology(TopologyProblem),
}

impl ProblemSpec {
    pub fn build(&self, base: &Path) -> Result<Built, CliError> {
        let saddle = |n, k| QuadraticSaddleSpec { n, k };
        Ok(match self {
            ProblemSpec::Rosenbrock { n } => Built::Objective(make_rosenbrock(*n)?),
            ProblemSpec::QuadraticSaddle { n, k } => Built::Objective(make_quadratic_saddle(saddle(*n, *k))?),
            ProblemSpec::ScaledSaddle { n, k, gamma } => Built::Objective(make_scaled_saddle(saddle(*n, *k), *gamma)?),
            ProblemSpec::DiagonalQuadratic { diag } => {
                Built::Objective(make_diagonal_quadratic("diagonal-quadratic", diag.clone())?)
            }
            ProblemSpec::Logistic {
                samples,
                features,
                support,
                l1_weight,
                l1_smoothing,
                data_seed,
                csv,
            } => {
                let data = match csv {
                    Some(p) => LogisticRegressionSpec::load_csv(&base.join(p), *l1_weight, *l1_smoothing)?,
                    None => {
                        let mut rng = RngStream::new(*data_seed);
                        let mut s = LogisticRegressionSpec::synthetic(*samples, *features, *support, *l1_weight, &mut rng)?;
                        s.l1_smoothing = *l1_smoothing;
                        s
                    }
                };
                Built::Objective(make_logistic(data)?)
            }
            ProblemSpec::Expsin => Built::Objective(make_expsin()),
            ProblemSpec::Cantilever {
                nx,
                ny,
                volume_fraction,
            } => Built::Topology(TopologyProblem::cantilever(*nx, *ny, *volume_fraction)?),
            ProblemSpec::Topology(p) => {
                p.validate()?;
                Built::Topology(p.clone())
            }
        })
    }
}

/// Either an objective-space method or the topology optimizer.
#[derive(Clone, Debug)]
pub enum OptimizerSpec {
    Method(Method),
    Casd(CasdConfig),
}

/// One optimizer entry with the label used in traces and summaries.
#[derive(Clone, Debug)]
pub struct LabelledOptimizer {
    pub label: String,
    pub optimizer: OptimizerSpec,
}

impl LabelledOptimizer {
    fn from_value(mut v: Value) -> Result<Self, CliError> {
        let obj = v
            .as_object_mut()
            .ok_or_else(|| CliError::Spec("optimizer entries must be objects".into()))?;
        let label = match obj.remove("label") {
            Some(Value::String(s)) => Some(s),
            Some(_) => return Err(CliError::Spec("optimizer label must be a string".into())),
            None => None,
        };
        let name = obj.get("name").and_then(Value::as_str).unwrap_or_default().to_string();
        let optimizer = if name == CASD {
            obj.remove("name");
            OptimizerSpec::Casd(serde_json::from_value(v).map_err(|e| CliError::Spec(format!("casd config: {e}")))?)
        } else if Method::NAMES.contains(&name.as_str()) {
            OptimizerSpec::Method(serde_json::from_value(v).map_err(|e| CliError::Spec(format!("{name} config: {e}")))?)
        } else {
            let mut valid: Vec<&str> = Method::NAMES.to_vec();
            valid.push(CASD);
            return Err(CliError::UnknownName {
                kind: "optimizer",
                name,
                valid: valid.join(", "),
            });
        };
        Ok(Self {
            label: label.unwrap_or(name),
            optimizer,
        })
    }

    pub fn to_value(&self) -> Value {
        let mut v = match &self.optimizer {
            OptimizerSpec::Method(m) => serde_json::to_value(m).expect("method serializes"),
            OptimizerSpec::Casd(c) => {
                let mut v = serde_json::to_value(c).expect("config serializes");
                v["name"] = CASD.into();
                v
            }
        };
        v["label"] = self.label.clone().into();
        v
    }
}

/// Starting point for objective problems.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum StartSpec {
    #[default]
    Zeros,
    /// The known saddle displaced by this amount along its most unstable
    /// eigenvector.
    SaddleOffset(f64),
    /// Independent `N(0, scale²)` coordinates drawn from the run's seed.
    Gaussian(f64),
    Point(Vec<f64>),
}

impl StartSpec {
    pub fn build(&self, problem: &ObjectiveProblem, seed: u64) -> Result<DenseVector, CliError> {
        let n = problem.dimension();
        let x = match self {
            StartSpec::Zeros => DenseVector::zeros(n),
            StartSpec::SaddleOffset(y0) => {
                let monitor = curvopt::instrument::EscapeMonitor::from_problem(problem, 1.0)?;
                &monitor.saddle + *y0 * &monitor.direction
            }
            StartSpec::Gaussian(scale) => RngStream::new(seed).split(u64::MAX).gaussian_vector(n, *scale)?,
            StartSpec::Point(p) => {
                if p.len() != n {
                    return Err(CliError::Spec(format!("start point has {} coordinates, problem has {n}", p.len())));
                }
                DenseVector::from_vec(p.clone())
            }
        };
        Ok(x)
    }
}

/// Optional early-stopping rules.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StopSpec {
    /// Stop once the unstable coordinate leaves this radius around the
    /// known saddle.
    pub escape_radius: Option<f64>,
    pub loss_below: Option<f64>,
    pub grad_norm_below: Option<f64>,
}

/// A full experiment after defaults are filled in.
#[derive(Clone, Debug)]
pub struct ExperimentSpec {
    pub problem: ProblemSpec,
    pub optimizers: Vec<LabelledOptimizer>,
    pub seeds: Vec<u64>,
    pub max_iters: usize,
    pub start: StartSpec,
    pub stop: StopSpec,
    pub reference_value: Option<f64>,
    pub snapshot_stride: Option<usize>,
    pub output_dir: PathBuf,
}

pub const DEFAULT_MAX_ITERS: usize = 1000;
pub const DEFAULT_OUTPUT_DIR: &str = "runs";

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSpec {
    problem: Value,
    optimizer: Value,
    #[serde(default = "default_seeds")]
    seeds: Vec<u64>,
    #[serde(default = "default_max_iters")]
    max_iters: usize,
    #[serde(default)]
    start: StartSpec,
    #[serde(default)]
    stop: StopSpec,
    #[serde(default)]
    reference_value: Option<f64>,
    #[serde(default)]
    snapshot_stride: Option<usize>,
    #[serde(default = "default_output_dir")]
    output_dir: PathBuf,
}

fn default_seeds() -> Vec<u64> {
    vec![0]
}
fn default_max_iters() -> usize {
    DEFAULT_MAX_ITERS
}
fn default_output_dir() -> PathBuf {
    PathBuf::from(DEFAULT_OUTPUT_DIR)
}

pub fn parse_problem(v: Value) -> Result<ProblemSpec, CliError> {
    let name = v.get("name").and_then(Value::as_str).unwrap_or_default();
    if !PROBLEM_NAMES.contains(&name) {
        return Err(CliError::UnknownName {
            kind: "problem",
            name: name.to_string(),
            valid: PROBLEM_NAMES.join(", "),
        });
    }
    serde_json::from_value(v).map_err(|e| CliError::Spec(format!("problem: {e}")))
}

impl ExperimentSpec {
    pub fn from_value(v: Value) -> Result<Self, CliError> {
        let raw: RawSpec = serde_json::from_value(v).map_err(|e| CliError::Spec(e.to_string()))?;
        let problem = parse_problem(raw.problem)?;
        let optimizers = match raw.optimizer {
            Value::Array(items) => items.into_iter().map(LabelledOptimizer::from_value).collect::<Result<Vec<_>, _>>()?,
            single => vec![LabelledOptimizer::from_value(single)?],
        };
        if optimizers.is_empty() {
            return Err(CliError::Spec("no optimizer given".into()));
        }
        let mut labels: Vec<&str> = optimizers.iter().map(|o| o.label.as_str()).collect();
        labels.sort_unstable();
        if labels.windows(2).any(|w| w[0] == w[1]) {
            return Err(CliError::Spec("optimizer labels must be distinct".into()));
        }
        if raw.seeds.is_empty() {
            return Err(CliError::Spec("seed list is empty".into()));
        }
        Ok(Self {
            problem,
            optimizers,
            seeds: raw.seeds,
            max_iters: raw.max_iters,
            start: raw.start,
            stop: raw.stop,
            reference_value: raw.reference_value,
            snapshot_stride: raw.snapshot_stride,
            output_dir: raw.output_dir,
        })
    }

    /// Fully resolved spec, defaults included.
    pub fn to_value(&self) -> Value {
        serde_json::json!({
            "problem": self.problem,
            "optimizer": self.optimizers.iter().map(LabelledOptimizer::to_value).collect::<Vec<_>>(),
            "seeds": self.seeds,
            "max_iters": self.max_iters,
            "start": self.start,
            "stop": self.stop,
            "reference_value": self.reference_value,
            "snapshot_stride": self.snapshot_stride,
            "output_dir": self.output_dir,
        })
    }
}

/// `η` or `σ` as `coefficient · n^exponent`.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PowerRule {
    pub coefficient: f64,
    #[serde(default)]
    pub exponent: f64,
}

impl PowerRule {
    pub fn at(&self, n: usize) -> f64 {
        self.coefficient * (n as f64).powf(self.exponent)
    }
}

/// Dimension-scaling campaign. With `points` set, the listed `(n, T)` medians
/// are fitted directly and nothing is simulated.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScalingSpec {
    /// Number of unstable directions of the quadratic-saddle family.
    #[serde(default = "default_unstable")]
    pub unstable: usize,
    #[serde(default)]
    pub dims: Vec<usize>,
    pub eta: Option<PowerRule>,
    pub sigma: Option<PowerRule>,
    #[serde(default = "default_scaling_seeds")]
    pub seeds: usize,
    #[serde(default)]
    pub base_seed: u64,
    #[serde(default = "default_scaling_iters")]
    pub max_iters: usize,
    #[serde(default = "default_delta")]
    pub delta: f64,
    #[serde(default = "default_bootstrap")]
    pub bootstrap: usize,
    #[serde(default)]
    pub points: Option<Vec<(usize, f64)>>,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
}

fn default_unstable() -> usize {
    1
}
fn default_scaling_seeds() -> usize {
    50
}
fn default_scaling_iters() -> usize {
    100_000
}
fn default_delta() -> f64 {
    1.0
}
fn default_bootstrap() -> usize {
    1000
}

/// Applies a `path=value` override. The value is parsed as JSON and taken as
/// a plain string if that fails; numeric path segments index arrays.
pub fn apply_override(root: &mut Value, assignment: &str) -> Result<(), CliError> {
    let (path, raw) = assignment
        .split_once('=')
        .ok_or_else(|| CliError::Spec(format!("override {assignment:?} is not of the form key=value")))?;
    let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    let mut node = root;
    let keys: Vec<&str> = path.split('.').collect();
    for (i, key) in keys.iter().enumerate() {
        let last = i + 1 == keys.len();
        node = match node {
            Value::Array(items) => {
                let idx: usize = key
                    .parse()
                    .map_err(|_| CliError::Spec(format!("{path}: {key:?} is not an array index")))?;
                items
                    .get_mut(idx)
                    .ok_or_else(|| CliError::Spec(format!("{path}: index {idx} out of range")))?
            }
            Value::Object(map) => {
                if last {
                    map.insert(key.to_string(), value);
                    return Ok(());
                }
                map.entry(key.to_string()).or_insert_with(|| Value::Object(Default::default()))
            }
            _ => return Err(CliError::Spec(format!("{path}: cannot descend into a scalar at {key:?}"))),
        };
        if last {
            *node = value;
            return Ok(());
        }
    }
    Err(CliError::Spec("empty override path".into()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn overrides_walk_objects_and_arrays() {
        let mut v = json!({"optimizer": [{"name": "gd", "eta": 0.1}], "seeds": [0]});
        apply_override(&mut v, "optimizer.0.eta=0.25").unwrap();
        apply_override(&mut v, "problem.name=expsin").unwrap();
        apply_override(&mut v, "seeds=[1,2]").unwrap();
        assert_eq!(v["optimizer"][0]["eta"], json!(0.25));
        assert_eq!(v["problem"]["name"], json!("expsin"));
        assert_eq!(v["seeds"], json!([1, 2]));
        assert!(apply_override(&mut v, "seeds.5=1").is_err());
        assert!(apply_override(&mut v, "noequals").is_err());
    }

    #[test]
    fn defaults_are_filled_and_serialized() {
        let spec = ExperimentSpec::from_value(json!({
            "problem": {"name": "quadratic_saddle", "n": 4, "k": 1},
            "optimizer": {"name": "caegsd", "alpha": 0.05},
        }))
        .unwrap();
        assert_eq!(spec.seeds, vec![0]);
        assert_eq!(spec.max_iters, DEFAULT_MAX_ITERS);
        let v = spec.to_value();
        assert_eq!(v["optimizer"][0]["alpha"], json!(0.05));
        assert_eq!(v["optimizer"][0]["window"], json!(5));
        let again = ExperimentSpec::from_value(v.clone()).unwrap();
        assert_eq!(again.to_value(), v);
    }

    #[test]
    fn unknown_names_list_alternatives() {
        let err = ExperimentSpec::from_value(json!({
            "problem": {"name": "expsin"},
            "optimizer": {"name": "adamw"},
        }))
        .unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("adamw") && msg.contains("caegsd") && msg.contains("casd"), "{msg}");
    }
}
