//! Gradient-norm entropy probe used to gate noise injection.

use crate::error::{Error, Result};
use crate::problem::ObjectiveProblem;
use crate::rng::RngStream;
use crate::DenseVector;

/// Outcome of one probe round.
#[derive(Clone, Debug, PartialEq)]
pub struct EntropyProbe {
    /// Natural-log entropy of the normalized probe gradient norms.
    pub entropy: f64,
    /// Perturbations `δᵢ`.
    pub offsets: Vec<DenseVector>,
    /// `‖∇f(x + δᵢ)‖`.
    pub norms: Vec<f64>,
}

/// `H = -Σ pᵢ ln pᵢ` with `pᵢ = nᵢ / Σⱼ nⱼ`.
///
/// All-zero norms give `ln M`: nothing distinguishes the probes.
pub fn entropy_of_norms(norms: &[f64]) -> Result<f64> {
    if norms.len() < 2 {
        return Err(Error::param("probe_count", "need at least 2 probes"));
    }
    if norms.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
        return Err(Error::NonFinite("probe gradient norm"));
    }
    let total: f64 = norms.iter().sum();
    if total == 0.0 {
        return Ok((norms.len() as f64).ln());
    }
    Ok(norms
        .iter()
        .map(|&v| v / total)
        .filter(|&p| p > 0.0)
        .map(|p| -p * p.ln())
        .sum())
}

/// Evaluates `‖∇f(x + δᵢ)‖` at `M` Gaussian offsets `δᵢ ~ N(0, probe_scale² I)`.
pub fn entropy_probe(
    problem: &ObjectiveProblem,
    x: &DenseVector,
    rng: &mut RngStream,
    probe_count: usize,
    probe_scale: f64,
) -> Result<EntropyProbe> {
    if probe_count < 2 {
        return Err(Error::param("probe_count", "need at least 2 probes"));
    }
    if !(probe_scale > 0.0 && probe_scale.is_finite()) {
        return Err(Error::param("probe_scale", format!("must be positive, got {probe_scale}")));
    }
    let mut offsets = Vec::with_capacity(probe_count);
    let mut norms = Vec::with_capacity(probe_count);
    for _ in 0..probe_count {
        let delta = rng.gaussian_vector(x.len(), probe_scale)?;
        norms.push(problem.gradient(&(x + &delta))?.norm());
        offsets.push(delta);
    }
    let entropy = entropy_of_norms(&norms)?;
    Ok(EntropyProbe {
        entropy,
        offsets,
        norms,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::objectives::{make_diagonal_quadratic, make_quadratic_saddle, QuadraticSaddleSpec};

    /// Direct evaluation of the entropy sum, written independently.
    fn oracle(norms: &[f64]) -> f64 {
        let s: f64 = norms.iter().sum();
        let mut h = 0.0;
        for n in norms {
            let p = n / s;
            if p > 0.0 {
                h -= p * p.ln();
            }
        }
        h
    }

    #[test]
    fn equal_norms_are_maximal() {
        let h = entropy_of_norms(&[2.0; 10]).unwrap();
        assert!((h - std::f64::consts::LN_10).abs() < 1e-12);
    }

    #[test]
    fn two_probe_example() {
        let h = entropy_of_norms(&[1.0, 3.0]).unwrap();
        assert!((h - 0.562335).abs() < 1e-6);
        assert!((h - oracle(&[1.0, 3.0])).abs() < 1e-15);
    }

    #[test]
    fn dominant_norm_is_nearly_zero() {
        let h = entropy_of_norms(&[1e6, 1.0, 1.0]).unwrap();
        assert!(h < 1e-4);
    }

    #[test]
    fn all_zero_is_ln_m() {
        assert!((entropy_of_norms(&[0.0; 4]).unwrap() - 4f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_arguments() {
        let p = make_diagonal_quadratic("q", vec![1.0, 1.0]).unwrap();
        let x = DenseVector::zeros(2);
        let mut rng = RngStream::new(0);
        assert!(entropy_probe(&p, &x, &mut rng, 1, 0.1).is_err());
        assert!(entropy_probe(&p, &x, &mut rng, 3, 0.0).is_err());
    }

    #[test]
    fn probe_matches_norms_and_bounds() {
        let p = make_quadratic_saddle(QuadraticSaddleSpec { n: 20, k: 2 }).unwrap();
        let x = DenseVector::from_element(20, 0.05);
        let mut rng = RngStream::new(11);
        let probe = entropy_probe(&p, &x, &mut rng, 10, 0.01).unwrap();
        assert_eq!(probe.norms.len(), 10);
        for (d, n) in probe.offsets.iter().zip(&probe.norms) {
            assert!((p.gradient(&(&x + d)).unwrap().norm() - n).abs() < 1e-15);
        }
        assert!((probe.entropy - oracle(&probe.norms)).abs() < 1e-12);
        assert!(probe.entropy <= 10f64.ln() + 1e-12);
    }
}
