use curvopt::instrument::*;
use curvopt::objectives::{make_diagonal_quadratic, make_quadratic_saddle, make_scaled_saddle, QuadraticSaddleSpec};
use curvopt::optimizers::Method;
use curvopt::{DenseVector, Error, OptimizerConfig, RngStream};

fn saddle(n: usize, gamma: f64) -> curvopt::ObjectiveProblem {
    make_scaled_saddle(QuadraticSaddleSpec { n, k: 1 }, gamma).unwrap()
}

fn offset(n: usize, y0: f64) -> DenseVector {
    let mut x = DenseVector::zeros(n);
    x[0] = y0;
    x
}

/// Iterates the unstable coordinate the same way gradient descent does.
fn recursion_oracle(eta: f64, gamma: f64, y0: f64, delta: f64) -> usize {
    let mut y = y0;
    let mut k = 0;
    while y.abs() < delta {
        y -= eta * (-gamma * y);
        k += 1;
    }
    k
}

fn gd_trace(eta: f64, gamma: f64, y0: f64, max_iters: usize) -> (curvopt::ObjectiveProblem, RunTrace) {
    let p = saddle(3, gamma);
    let out = run_method(
        &p,
        &Method::Gd { eta },
        &offset(3, y0),
        0,
        RngStream::new(0),
        &RunOptions::new(max_iters).with_snapshots(1),
    )
    .unwrap();
    (p, out.trace)
}

#[test]
fn stays_inside_radius_means_no_escape() {
    let (p, trace) = gd_trace(0.01, 1.0, 1e-3, 50);
    let rec = detect_escape(&trace, &p, 1.0).unwrap();
    assert_eq!(rec.escape_iteration, None);
    assert_eq!(trace.len(), 51);
}

#[test]
fn gd_escape_matches_recursion_and_closed_form() {
    let (p, trace) = gd_trace(0.01, 1.0, 0.01, 600);
    let rec = detect_escape(&trace, &p, 1.0).unwrap();
    assert_eq!(rec.escape_iteration, Some(463));
    assert_eq!(recursion_oracle(0.01, 1.0, 0.01, 1.0), 463);
    let closed = predicted_escape_time(0.01, 1.0, 1.0, 0.01);
    assert!((closed - 460.517).abs() < 1e-3);
    assert!((463.0 - closed).abs() / closed < 0.01);
    assert!((rec.predicted.unwrap() - closed).abs() < 1e-9);
    assert_eq!(rec.gamma, 1.0);
}

#[test]
fn detected_escape_equals_oracle_on_grid() {
    for eta in [0.003, 0.01, 0.03, 0.1] {
        for gamma in [0.5, 1.0, 2.0, 3.0] {
            for y0 in [1e-4, 1e-3, 1e-2, 1e-1] {
                for delta in [0.5, 1.0, 2.0, 5.0] {
                    let expected = recursion_oracle(eta, gamma, y0, delta);
                    let p = saddle(3, gamma);
                    let monitor = EscapeMonitor::from_problem(&p, delta).unwrap();
                    let out = run_method(
                        &p,
                        &Method::Gd { eta },
                        &offset(3, y0),
                        0,
                        RngStream::new(0),
                        &RunOptions::new(expected + 10).with_snapshots(1).stop_when(StopRule::Escape(monitor)),
                    )
                    .unwrap();
                    let rec = detect_escape(&out.trace, &p, delta).unwrap();
                    assert_eq!(rec.escape_iteration, Some(expected), "{eta} {gamma} {y0} {delta}");
                    assert_eq!(out.trace.rows.last().unwrap().iter, expected);
                }
            }
        }
    }
}

#[test]
fn coarse_snapshots_are_refused() {
    let p = saddle(3, 1.0);
    let out = run_method(
        &p,
        &Method::Gd { eta: 0.1 },
        &offset(3, 0.1),
        0,
        RngStream::new(0),
        &RunOptions::new(40).with_snapshots(2),
    )
    .unwrap();
    assert!(matches!(detect_escape(&out.trace, &p, 1.0), Err(Error::CannotInstrument(_))));
}

#[test]
fn problems_without_saddles_cannot_be_instrumented() {
    let p = make_diagonal_quadratic("bowl", vec![1.0, 2.0]).unwrap();
    assert!(matches!(EscapeMonitor::from_problem(&p, 1.0), Err(Error::CannotInstrument(_))));
}

#[test]
fn convergence_rate_examples() {
    let geometric: Vec<f64> = (0..40).map(|k| 0.5f64.powi(k)).collect();
    assert!((convergence_rate(&geometric, 0, Some(0.0)).unwrap() - 0.5).abs() < 1e-12);
    assert_eq!(convergence_rate(&[3.0; 10], 0, None).unwrap(), 0.0);
    assert!(convergence_rate(&[1.0, 0.5], 5, None).is_err());

    let p = make_diagonal_quadratic("half-square", vec![1.0]).unwrap();
    let out = run_method(
        &p,
        &Method::Gd { eta: 0.1 },
        &DenseVector::from_element(1, 1.0),
        0,
        RngStream::new(0),
        &RunOptions::new(100),
    )
    .unwrap();
    let rate = convergence_rate(&out.trace.values(), 0, out.trace.meta.problem.reference_value).unwrap();
    assert!((rate - 0.19).abs() < 1e-12);
}

#[test]
fn loss_threshold_detector() {
    let v = [10.0, 5.0, 1.0, 0.05, 0.005];
    assert_eq!(loss_threshold_escape(&v, LossThreshold::Absolute(1e-2)), Some(4));
    let rel = LossThreshold::RelativeExcess {
        reference: 0.0,
        fraction: 1e-2,
    };
    assert_eq!(loss_threshold_escape(&v, rel), Some(3));
    assert_eq!(loss_threshold_escape(&v[..3], rel), None);
}

fn caegsd_run(seed: u64, steps: usize) -> RunTrace {
    let p = curvopt::objectives::make_rosenbrock(6).unwrap();
    let cfg = OptimizerConfig {
        entropy_threshold: 10f64.ln() - 1e-4,
        subspace_dim: 2,
        ..Default::default()
    };
    run_method(
        &p,
        &Method::Caegsd(cfg),
        &DenseVector::zeros(6),
        seed,
        RngStream::new(seed),
        &RunOptions::new(steps).with_snapshots(10),
    )
    .unwrap()
    .trace
}

#[test]
fn trace_round_trip_is_exact() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("run.csv");
    let trace = caegsd_run(3, 1000);
    assert_eq!(trace.len(), 1001);
    save_trace(&trace, &path).unwrap();
    let back = load_trace(&path).unwrap();
    assert_eq!(back, trace);
}

#[test]
fn truncated_trace_is_a_schema_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("run.csv");
    save_trace(&caegsd_run(1, 50), &path).unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    std::fs::write(&path, &text[..text.len() / 2]).unwrap();
    assert!(matches!(load_trace(&path), Err(Error::Schema { .. })));

    save_trace(&caegsd_run(1, 50), &path).unwrap();
    let meta = dir.path().join("run.json");
    let json = std::fs::read_to_string(&meta).unwrap().replace("\"schema_version\": 1", "\"schema_version\": 99");
    std::fs::write(&meta, json).unwrap();
    assert!(matches!(load_trace(&path), Err(Error::Schema { .. })));
}

#[test]
fn same_seed_gives_identical_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a.csv"), dir.path().join("b.csv"));
    save_trace(&caegsd_run(7, 300), &a).unwrap();
    save_trace(&caegsd_run(7, 300), &b).unwrap();
    for (x, y) in [("a.csv", "b.csv"), ("a.iterates.csv", "b.iterates.csv")] {
        assert_eq!(
            std::fs::read(dir.path().join(x)).unwrap(),
            std::fs::read(dir.path().join(y)).unwrap()
        );
    }
    let ja = std::fs::read_to_string(dir.path().join("a.json")).unwrap();
    let jb = std::fs::read_to_string(dir.path().join("b.json")).unwrap();
    assert_eq!(ja, jb);
}

#[test]
fn activation_fraction_counts_gated_steps() {
    let trace = caegsd_run(5, 400);
    let gated: Vec<bool> = trace.rows.iter().filter_map(|r| r.noise_active).collect();
    let on = gated.iter().filter(|&&b| b).count();
    assert_eq!(trace.activation_fraction().unwrap(), on as f64 / gated.len() as f64);
    let acc = noise_accounting(&trace, 0.1);
    assert_eq!(acc.activations, on);
    assert_eq!(acc.nu, trace.activation_fraction().unwrap());
}

#[test]
fn least_squares_slope_recovers_power_law() {
    let pts: Vec<(f64, f64)> = [8.0f64, 32.0, 128.0, 512.0]
        .iter()
        .map(|&n| (n.ln(), (3.0 * n.powf(0.75)).ln()))
        .collect();
    assert!((least_squares_slope(&pts).unwrap() - 0.75).abs() < 1e-12);
    assert_eq!(least_squares_slope(&pts[..1]), None);
}

#[test]
fn fixed_noise_and_step_give_flat_scaling() {
    let family = |n: usize| make_quadratic_saddle(QuadraticSaddleSpec { n, k: 1 });
    let eta = |_: usize| 0.1;
    let sigma = |_: usize| 1.0;
    let setup = ScalingSetup {
        family: &family,
        eta_rule: &eta,
        sigma_rule: &sigma,
        dims: vec![8, 32, 128],
        seeds: 40,
        base_seed: 11,
        max_iters: 2000,
        delta: 1.0,
        bootstrap: 200,
    };
    let result = escape_time_scaling(&setup).unwrap();
    assert!(result.warnings.is_empty());
    let slope = result.slope.unwrap();
    assert!(slope.abs() < 0.1, "slope {slope}");
    let (lo, hi) = result.interval.unwrap();
    assert!(lo <= slope && slope <= hi);
    assert_eq!(escape_time_scaling(&setup).unwrap(), result);
}

#[test]
fn censored_dimensions_are_flagged() {
    let family = |n: usize| make_quadratic_saddle(QuadraticSaddleSpec { n, k: 1 });
    let eta = |n: usize| if n > 10 { 1e-6 } else { 0.1 };
    let sigma = |_: usize| 1.0;
    let setup = ScalingSetup {
        family: &family,
        eta_rule: &eta,
        sigma_rule: &sigma,
        dims: vec![8, 16],
        seeds: 30,
        base_seed: 1,
        max_iters: 50,
        delta: 1.0,
        bootstrap: 10,
    };
    let result = escape_time_scaling(&setup).unwrap();
    assert!(result.rows[1].censored);
    assert_eq!(result.warnings.len(), 2);
    assert_eq!(result.slope, None);
    let few = ScalingSetup { seeds: 5, ..setup };
    assert!(escape_time_scaling(&few).is_err());
}
