//! Continuous-time gradient flow `dx/dt = -∇f(x)` by classical RK4.

use crate::error::{Error, Result};
use crate::problem::ObjectiveProblem;
use crate::DenseVector;

/// Integrator settings.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FlowOptions {
    pub dt: f64,
    /// Keep every `sample_stride`-th state (the final state is always kept).
    pub sample_stride: usize,
    /// Stop once `‖x‖` exceeds this.
    pub divergence_cutoff: f64,
}

impl Default for FlowOptions {
    fn default() -> Self {
        Self {
            dt: 1e-3,
            sample_stride: 1,
            divergence_cutoff: 1e6,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum FlowStatus {
    Completed,
    /// The state left the cutoff ball or became non-finite at `time`.
    Diverged { time: f64 },
}

/// Sampled solution `(t, x(t))`.
#[derive(Clone, Debug, PartialEq)]
pub struct FlowTrajectory {
    pub times: Vec<f64>,
    pub states: Vec<DenseVector>,
    pub status: FlowStatus,
}

impl FlowTrajectory {
    pub fn last(&self) -> (f64, &DenseVector) {
        let i = self.times.len() - 1;
        (self.times[i], &self.states[i])
    }
}

/// Integrates from `x0` to `t_end` with step `dt` and default options.
pub fn gradient_flow(problem: &ObjectiveProblem, x0: &DenseVector, t_end: f64, dt: f64) -> Result<FlowTrajectory> {
    gradient_flow_with(
        problem,
        x0,
        t_end,
        FlowOptions {
            dt,
            ..Default::default()
        },
    )
}

/// Integrates from `x0` to `t_end`. The step is shrunk slightly so that an
/// integer number of steps lands exactly on `t_end`.
pub fn gradient_flow_with(
    problem: &ObjectiveProblem,
    x0: &DenseVector,
    t_end: f64,
    options: FlowOptions,
) -> Result<FlowTrajectory> {
    let dt = options.dt;
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::param("dt", format!("must be positive, got {dt}")));
    }
    if !(t_end >= dt && t_end.is_finite()) {
        return Err(Error::param("t_end", format!("must be at least dt, got {t_end}")));
    }
    if options.sample_stride == 0 {
        return Err(Error::param("sample_stride", "must be positive"));
    }
    if x0.len() != problem.dimension() {
        return Err(Error::DimensionMismatch {
            expected: problem.dimension(),
            actual: x0.len(),
        });
    }
    let steps = (t_end / dt - 1e-9).ceil() as usize;
    let h = t_end / steps as f64;
    let field = |x: &DenseVector| -> Option<DenseVector> {
        let g = problem.gradient(x).ok()?;
        Some(-g)
    };

    let mut times = vec![0.0];
    let mut states = vec![x0.clone()];
    let mut x = x0.clone();
    for i in 1..=steps {
        let t = i as f64 * h;
        let next = (|| {
            let k1 = field(&x)?;
            let k2 = field(&(&x + 0.5 * h * &k1))?;
            let k3 = field(&(&x + 0.5 * h * &k2))?;
            let k4 = field(&(&x + h * &k3))?;
            Some(&x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4))
        })();
        match next {
            Some(v) if v.iter().all(|c| c.is_finite()) && v.norm() <= options.divergence_cutoff => x = v,
            _ => {
                if *times.last().unwrap() != t - h {
                    times.push(t - h);
                    states.push(x);
                }
                return Ok(FlowTrajectory {
                    times,
                    states,
                    status: FlowStatus::Diverged { time: t },
                });
            }
        }
        if i % options.sample_stride == 0 || i == steps {
            times.push(t);
            states.push(x.clone());
        }
    }
    Ok(FlowTrajectory {
        times,
        states,
        status: FlowStatus::Completed,
    })
}
