use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use curvopt::instrument::{
    aggregate, escape_time_scaling, least_squares_slope, load_trace, run_method, save_trace, summarize_run,
    write_summary, EscapeMonitor, RunOptions, RunStatus, RunTrace, ScalingRow, ScalingSetup, StopRule, CENSORED,
};
use curvopt::objectives::{make_quadratic_saddle, QuadraticSaddleSpec};
use curvopt::topopt::run_casd;
use curvopt::RngStream;
use rayon::prelude::*;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::spec::{apply_override, Built, ExperimentSpec, OptimizerSpec, ScalingSpec};
use crate::{CliError, CommonArgs};

pub const MANIFEST_SCHEMA_VERSION: u32 = 1;
pub const MANIFEST: &str = "manifest.json";
pub const SUMMARY: &str = "summary.csv";

fn io_err(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Io(format!("{}: {e}", path.display()))
}

fn read_json(path: &Path) -> Result<Value, CliError> {
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    serde_json::from_str(&text).map_err(|e| CliError::Spec(format!("{}: {e}", path.display())))
}

fn write_json(path: &Path, v: &Value) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(v).expect("json values serialize");
    text.push('\n');
    fs::write(path, text).map_err(|e| io_err(path, e))
}

fn load_spec(path: &Path, common: &CommonArgs) -> Result<Value, CliError> {
    let mut v = read_json(path)?;
    for o in &common.overrides {
        apply_override(&mut v, o)?;
    }
    Ok(v)
}

fn pool(workers: Option<usize>) -> Result<rayon::ThreadPool, CliError> {
    let n = workers.unwrap_or_else(num_cpus::get_physical).max(1);
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build()
        .map_err(|e| CliError::Spec(format!("worker pool: {e}")))
}

fn unix_ms() -> u128 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_millis())
}

fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

fn create_dir(path: &Path) -> Result<(), CliError> {
    fs::create_dir_all(path).map_err(|e| io_err(path, e))
}

struct Job<'a> {
    label: &'a str,
    optimizer: &'a OptimizerSpec,
    seed: u64,
}

struct Finished {
    trace: RunTrace,
    file: PathBuf,
}

/// Executes an experiment. `Ok(false)` means some run did not complete.
pub fn run(spec_path: &Path, common: &CommonArgs) -> Result<bool, CliError> {
    let started = unix_ms();
    let mut spec = ExperimentSpec::from_value(load_spec(spec_path, common)?)?;
    for s in &mut spec.seeds {
        *s = s
            .checked_add(common.seed_offset)
            .ok_or_else(|| CliError::Spec("seed offset overflows".into()))?;
    }
    if let Some(out) = &common.out {
        spec.output_dir = out.clone();
    }
    let resolved = spec.to_value();
    // The hash identifies the experiment, so it ignores where results go.
    let mut hashed = resolved.clone();
    hashed.as_object_mut().expect("spec is an object").remove("output_dir");
    let spec_hash = sha256_hex(serde_json::to_string(&hashed).expect("json values serialize").as_bytes());

    let base = spec_path.parent().unwrap_or(Path::new("."));
    let problem = spec.problem.build(base)?;
    for o in &spec.optimizers {
        match (&problem, &o.optimizer) {
            (Built::Objective(_), OptimizerSpec::Casd(_)) => {
                return Err(CliError::Spec(format!("{}: casd needs a topology problem", o.label)))
            }
            (Built::Topology(_), OptimizerSpec::Method(_)) => {
                return Err(CliError::Spec(format!("{}: topology problems run only with casd", o.label)))
            }
            _ => {}
        }
    }
    let stop = match &problem {
        Built::Objective(p) => {
            let mut rules = Vec::new();
            if let Some(delta) = spec.stop.escape_radius {
                rules.push(StopRule::Escape(EscapeMonitor::from_problem(p, delta)?));
            }
            rules.extend(spec.stop.loss_below.map(StopRule::LossBelow));
            rules.extend(spec.stop.grad_norm_below.map(StopRule::GradNormBelow));
            rules
        }
        Built::Topology(_) => Vec::new(),
    };

    let out = spec.output_dir.clone();
    let traces_dir = out.join("traces");
    create_dir(&traces_dir)?;
    let jobs: Vec<Job> = spec
        .optimizers
        .iter()
        .flat_map(|o| {
            spec.seeds.iter().map(move |&seed| Job {
                label: &o.label,
                optimizer: &o.optimizer,
                seed,
            })
        })
        .collect();

    let execute = |job: &Job| -> Result<Finished, CliError> {
        let rng = RngStream::new(job.seed);
        let stem = format!("{}-seed{}", job.label, job.seed);
        let file = PathBuf::from("traces").join(format!("{stem}.csv"));
        let mut trace = match (&problem, job.optimizer) {
            (Built::Objective(p), OptimizerSpec::Method(m)) => {
                let mut options = RunOptions::new(spec.max_iters);
                options.snapshot_stride = spec.snapshot_stride;
                options.stop = stop.clone();
                options.reference_value = spec.reference_value;
                let x0 = spec.start.build(p, job.seed)?;
                run_method(p, m, &x0, job.seed, rng, &options)?.trace
            }
            (Built::Topology(t), OptimizerSpec::Casd(c)) => {
                let stride = spec.snapshot_stride.unwrap_or(spec.max_iters.max(1));
                let run = run_casd(t, c, spec.max_iters, job.seed, rng, stride)?;
                let dir = traces_dir.join(format!("{stem}-densities"));
                create_dir(&dir)?;
                run.write_snapshots(t, &dir)?;
                run.trace
            }
            _ => unreachable!("checked above"),
        };
        trace.meta.method = job.label.to_string();
        save_trace(&trace, &out.join(&file))?;
        Ok(Finished { trace, file })
    };
    let results: Vec<Finished> = pool(common.workers)?.install(|| jobs.par_iter().map(execute).collect::<Result<_, _>>())?;

    let summaries = results
        .iter()
        .map(|r| summarize_run(&r.trace))
        .collect::<curvopt::Result<Vec<_>>>()?;
    write_summary(&aggregate(&summaries), &out.join(SUMMARY))?;

    let mut all_completed = true;
    let runs: Vec<Value> = jobs
        .iter()
        .zip(&results)
        .map(|(job, r)| {
            if matches!(r.trace.meta.status, RunStatus::Diverged { .. }) {
                all_completed = false;
                eprintln!("warning: {} seed {} diverged", job.label, job.seed);
            }
            json!({
                "label": job.label,
                "seed": job.seed,
                "trace": r.file,
                "rows": r.trace.len(),
                "status": r.trace.meta.status,
            })
        })
        .collect();
    let manifest = json!({
        "schema_version": MANIFEST_SCHEMA_VERSION,
        "tool_version": env!("CARGO_PKG_VERSION"),
        "spec_file": spec_path,
        "spec_sha256": spec_hash,
        "spec": resolved,
        "started_unix_ms": started as u64,
        "finished_unix_ms": unix_ms() as u64,
        "summary": SUMMARY,
        "runs": runs,
    });
    write_json(&out.join(MANIFEST), &manifest)?;
    println!("{} runs written to {}", results.len(), out.display());
    print_file(&out.join(SUMMARY));
    Ok(all_completed)
}

fn print_file(path: &Path) {
    if let Ok(text) = fs::read_to_string(path) {
        print!("{text}");
    }
}

/// Recomputes `summary.csv` from the traces named in the manifest. Traces
/// that are missing or unreadable are skipped with a warning.
pub fn report(dir: &Path, out: Option<&Path>) -> Result<(), CliError> {
    let manifest = read_json(&dir.join(MANIFEST))?;
    let runs = manifest["runs"]
        .as_array()
        .ok_or_else(|| CliError::Spec(format!("{}: no run list", dir.join(MANIFEST).display())))?;
    let mut summaries = Vec::new();
    for run in runs {
        let Some(file) = run["trace"].as_str() else {
            eprintln!("warning: manifest entry without a trace path");
            continue;
        };
        match load_trace(&dir.join(file)).and_then(|t| summarize_run(&t)) {
            Ok(s) => summaries.push(s),
            Err(e) => eprintln!("warning: skipping {file}: {e}"),
        }
    }
    if summaries.len() < runs.len() {
        eprintln!("warning: partial report from {} of {} runs", summaries.len(), runs.len());
    }
    let out = out.unwrap_or(dir);
    create_dir(out)?;
    let path = out.join(SUMMARY);
    write_summary(&aggregate(&summaries), &path)?;
    print_file(&path);
    Ok(())
}

fn format_slope(slope: Option<f64>) -> String {
    slope.map_or_else(|| "undefined".into(), |s| format!("{s:.6}"))
}

/// Escape-time scaling sweep, or a plain fit of given `(n, T)` medians.
pub fn scaling(spec_path: &Path, common: &CommonArgs) -> Result<(), CliError> {
    let raw = load_spec(spec_path, common)?;
    let mut spec: ScalingSpec = serde_json::from_value(raw).map_err(|e| CliError::Spec(e.to_string()))?;
    spec.base_seed = spec
        .base_seed
        .checked_add(common.seed_offset)
        .ok_or_else(|| CliError::Spec("seed offset overflows".into()))?;
    if let Some(out) = &common.out {
        spec.output_dir = out.clone();
    }
    let out = spec.output_dir.clone();
    create_dir(&out)?;

    let (rows, slope, interval, warnings) = match &spec.points {
        Some(points) => {
            if points.iter().any(|&(n, t)| n == 0 || !(t > 0.0)) {
                return Err(CliError::Spec("points need n > 0 and T > 0".into()));
            }
            let logs: Vec<(f64, f64)> = points.iter().map(|&(n, t)| ((n as f64).ln(), t.ln())).collect();
            let rows: Vec<Value> = points.iter().map(|&(n, t)| json!({"n": n, "median": t})).collect();
            let slope = least_squares_slope(&logs);
            let warnings = if slope.is_none() {
                vec!["fewer than two distinct dimensions; slope undefined".to_string()]
            } else {
                Vec::new()
            };
            (rows, slope, None, warnings)
        }
        None => {
            let (Some(eta), Some(sigma)) = (spec.eta, spec.sigma) else {
                return Err(CliError::Spec("eta and sigma rules are required unless points are given".into()));
            };
            let k = spec.unstable;
            let family = move |n: usize| make_quadratic_saddle(QuadraticSaddleSpec { n, k });
            let eta_rule = move |n: usize| eta.at(n);
            let sigma_rule = move |n: usize| sigma.at(n);
            let setup = ScalingSetup {
                family: &family,
                eta_rule: &eta_rule,
                sigma_rule: &sigma_rule,
                dims: spec.dims.clone(),
                seeds: spec.seeds,
                base_seed: spec.base_seed,
                max_iters: spec.max_iters,
                delta: spec.delta,
                bootstrap: spec.bootstrap,
            };
            let result = pool(common.workers)?.install(|| escape_time_scaling(&setup))?;
            write_scaling_csv(&result.rows, &out.join("scaling.csv"))?;
            let rows = result
                .rows
                .iter()
                .map(|r| json!({"n": r.n, "eta": r.eta, "sigma": r.sigma, "escaped": r.escaped(), "median": r.median}))
                .collect();
            (rows, result.slope, result.interval, result.warnings)
        }
    };
    for w in &warnings {
        eprintln!("warning: {w}");
    }
    let report = json!({
        "slope": slope.map_or(Value::from("undefined"), Value::from),
        "interval": interval.map(|(lo, hi)| vec![lo, hi]),
        "rows": rows,
        "warnings": warnings,
        "spec": spec,
    });
    write_json(&out.join("scaling.json"), &report)?;
    match interval {
        Some((lo, hi)) => println!("slope {} (95% CI {lo:.4} to {hi:.4})", format_slope(slope)),
        None => println!("slope {}", format_slope(slope)),
    }
    Ok(())
}

fn write_scaling_csv(rows: &[ScalingRow], path: &Path) -> Result<(), CliError> {
    let mut text = String::from("n,eta,sigma,runs,escaped,median_escape_time\n");
    for r in rows {
        let median = r.median.map_or_else(|| CENSORED.to_string(), |m| m.to_string());
        text.push_str(&format!("{},{},{},{},{},{median}\n", r.n, r.eta, r.sigma, r.times.len(), r.escaped()));
    }
    fs::write(path, text).map_err(|e| io_err(path, e))
}
