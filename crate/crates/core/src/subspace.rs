//! Random and gradient-covariance subspaces.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::RngStream;
use crate::spectral::{eigh, fix_sign, sort_pairs};
use crate::{DenseMatrix, DenseVector};

/// How a subspace projection is applied to an update.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProjectionMode {
    /// Project the step: `x⁺ = x + P(Δ)`.
    #[default]
    Displacement,
    /// Project the candidate iterate through the origin: `x⁺ = P(x + Δ)`.
    Iterate,
}

/// `n × m` matrix with orthonormal columns.
#[derive(Clone, Debug, PartialEq)]
pub struct SubspaceBasis {
    basis: DenseMatrix,
    mode: ProjectionMode,
}

/// Tolerance on `BᵀB = I` accepted by [`SubspaceBasis::new`].
pub const ORTHONORMAL_TOLERANCE: f64 = 1e-10;

impl SubspaceBasis {
    pub fn new(basis: DenseMatrix, mode: ProjectionMode) -> Result<Self> {
        let (n, m) = basis.shape();
        if m == 0 || m > n {
            return Err(Error::InvalidDimension(format!("basis of {m} columns in dimension {n}")));
        }
        let gram = basis.tr_mul(&basis);
        let err = (gram - DenseMatrix::identity(m, m)).amax();
        if err > ORTHONORMAL_TOLERANCE {
            return Err(Error::InvalidSpec(format!("basis columns not orthonormal (error {err:e})")));
        }
        Ok(Self { basis, mode })
    }

    /// The full space `ℝⁿ` in the standard basis.
    pub fn full(n: usize) -> Self {
        Self {
            basis: DenseMatrix::identity(n, n),
            mode: ProjectionMode::Displacement,
        }
    }

    pub fn with_mode(mut self, mode: ProjectionMode) -> Self {
        self.mode = mode;
        self
    }

    pub fn mode(&self) -> ProjectionMode {
        self.mode
    }

    pub fn matrix(&self) -> &DenseMatrix {
        &self.basis
    }

    pub fn ambient_dim(&self) -> usize {
        self.basis.nrows()
    }

    pub fn rank(&self) -> usize {
        self.basis.ncols()
    }

    /// Dense projector `P = BBᵀ`.
    pub fn projector(&self) -> DenseMatrix {
        &self.basis * self.basis.transpose()
    }

    /// `B(Bᵀv)`.
    pub fn project(&self, v: &DenseVector) -> Result<DenseVector> {
        if v.len() != self.ambient_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.ambient_dim(),
                actual: v.len(),
            });
        }
        Ok(&self.basis * self.basis.tr_mul(v))
    }

    /// `‖Pg‖² / ‖g‖²`, the fraction of squared gradient norm kept.
    pub fn preservation_ratio(&self, g: &DenseVector) -> Result<f64> {
        let norm2 = g.norm_squared();
        if norm2 == 0.0 {
            return Err(Error::UndefinedRatio);
        }
        if g.len() != self.ambient_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.ambient_dim(),
                actual: g.len(),
            });
        }
        // ‖Pg‖ = ‖Bᵀg‖ for orthonormal B.
        Ok((self.basis.tr_mul(g).norm_squared() / norm2).min(1.0))
    }
}

/// Two-pass modified Gram–Schmidt. Columns whose residual norm falls below
/// `drop_tol` times their original norm are discarded.
pub fn orthonormalize(columns: &DenseMatrix, drop_tol: f64) -> DenseMatrix {
    let n = columns.nrows();
    let mut kept: Vec<DenseVector> = Vec::with_capacity(columns.ncols());
    for col in columns.column_iter() {
        let original = col.norm();
        if original == 0.0 {
            continue;
        }
        let mut v: DenseVector = col.into_owned();
        for _ in 0..2 {
            for q in &kept {
                let c = q.dot(&v);
                v.axpy(-c, q, 1.0);
            }
        }
        let r = v.norm();
        if r > drop_tol * original {
            kept.push(v / r);
        }
    }
    if kept.is_empty() {
        return DenseMatrix::zeros(n, 0);
    }
    DenseMatrix::from_columns(&kept)
}

/// Orthonormalized `n × m` standard-Gaussian matrix: a uniformly distributed
/// `m`-dimensional subspace.
pub fn sample_random_subspace(rng: &mut RngStream, n: usize, m: usize) -> Result<SubspaceBasis> {
    if m == 0 || m > n {
        return Err(Error::InvalidDimension(format!("subspace dimension {m} must lie in 1..={n}")));
    }
    loop {
        let raw = DenseMatrix::from_fn(n, m, |_, _| rng.standard_normal());
        let q = orthonormalize(&raw, 1e-8);
        // Rank deficiency has probability zero; redraw if it ever happens.
        if q.ncols() == m {
            return Ok(SubspaceBasis {
                basis: q,
                mode: ProjectionMode::Displacement,
            });
        }
    }
}

/// FIFO buffer of the last `h + 1` gradients.
#[derive(Clone, Debug, PartialEq)]
pub struct GradientWindow {
    capacity: usize,
    buf: VecDeque<DenseVector>,
}

impl GradientWindow {
    /// Window over the last `h + 1` gradients.
    pub fn new(h: usize) -> Self {
        Self {
            capacity: h + 1,
            buf: VecDeque::with_capacity(h + 1),
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.buf.len()
    }

    pub fn is_empty(&self) -> bool {
        self.buf.is_empty()
    }

    pub fn push(&mut self, g: DenseVector) {
        if self.buf.len() == self.capacity {
            self.buf.pop_front();
        }
        self.buf.push_back(g);
    }

    pub fn iter(&self) -> impl Iterator<Item = &DenseVector> {
        self.buf.iter()
    }

    pub fn latest(&self) -> Option<&DenseVector> {
        self.buf.back()
    }

    /// `Ĉ = Σⱼ gⱼgⱼᵀ` as a dense matrix.
    pub fn covariance(&self) -> Option<DenseMatrix> {
        let n = self.buf.front()?.len();
        let mut c = DenseMatrix::zeros(n, n);
        for g in &self.buf {
            c.ger(1.0, g, g, 1.0);
        }
        Some(c)
    }

    fn stacked(&self) -> Option<DenseMatrix> {
        self.buf.front()?;
        let cols: Vec<DenseVector> = self.buf.iter().cloned().collect();
        Some(DenseMatrix::from_columns(&cols))
    }
}

/// Top-`m` eigenpairs of the window covariance, eigenvalues descending.
///
/// The nonzero part is computed from the small Gram matrix `GᵀG` of the
/// stacked gradients (same nonzero spectrum as `Ĉ = GGᵀ`). When `m` exceeds the
/// rank, the basis is completed with standard-basis directions orthogonalized
/// against it, carrying eigenvalue zero.
pub fn covariance_eigenpairs(window: &GradientWindow, m: usize) -> Result<(SubspaceBasis, DenseVector)> {
    let g = window.stacked().ok_or(Error::DegenerateWindow)?;
    let n = g.nrows();
    if m == 0 || m > n {
        return Err(Error::InvalidDimension(format!("subspace dimension {m} must lie in 1..={n}")));
    }
    let gram = g.tr_mul(&g);
    let small = eigh(&gram)?;
    let top = small.eigenvalues().max();
    if !(top > 0.0) {
        return Err(Error::DegenerateWindow);
    }
    let cutoff = 1e-10 * top;
    let mut values = Vec::new();
    let mut vectors = Vec::new();
    for j in (0..small.len()).rev() {
        let mu = small.eigenvalues()[j];
        if mu <= cutoff {
            break;
        }
        let mut v = &g * small.eigenvectors().column(j) / mu.sqrt();
        v /= v.norm();
        values.push(mu);
        vectors.push(v);
    }
    let mut mat = DenseMatrix::from_columns(&vectors);
    for j in 0..mat.ncols() {
        fix_sign(mat.column_mut(j));
    }
    // Descending order with the same tie-break as `eigh`.
    let neg = DenseVector::from_iterator(values.len(), values.iter().map(|v| -v));
    let (neg_sorted, mat) = sort_pairs(&neg, &mat, 1e-12 * top);
    let mut values: Vec<f64> = neg_sorted.iter().map(|v| -v).collect();

    let mut mat = orthonormalize(&mat, 1e-8);
    values.truncate(mat.ncols());
    if mat.ncols() > m {
        mat = mat.columns(0, m).into_owned();
        values.truncate(m);
    } else if mat.ncols() < m {
        let mut cols: Vec<DenseVector> = mat.column_iter().map(|c| c.into_owned()).collect();
        let mut e = 0;
        while cols.len() < m && e < n {
            let mut cand = DenseVector::zeros(n);
            cand[e] = 1.0;
            e += 1;
            for _ in 0..2 {
                for q in &cols {
                    let c = q.dot(&cand);
                    cand.axpy(-c, q, 1.0);
                }
            }
            let r = cand.norm();
            if r > 1e-8 {
                cols.push(cand / r);
                values.push(0.0);
            }
        }
        mat = DenseMatrix::from_columns(&cols);
    }
    Ok((
        SubspaceBasis {
            basis: mat,
            mode: ProjectionMode::Displacement,
        },
        DenseVector::from_vec(values),
    ))
}

/// Span of the top-`m` eigenvectors of `Ĉ = Σⱼ gⱼgⱼᵀ` over the window.
pub fn covariance_basis(window: &GradientWindow, m: usize) -> Result<SubspaceBasis> {
    covariance_eigenpairs(window, m).map(|(b, _)| b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn e(n: usize, i: usize) -> DenseVector {
        let mut v = DenseVector::zeros(n);
        v[i] = 1.0;
        v
    }

    #[test]
    fn full_subspace_projects_to_identity() {
        let mut rng = RngStream::new(1);
        let b = sample_random_subspace(&mut rng, 6, 6).unwrap();
        let g = rng.gaussian_vector(6, 1.0).unwrap();
        assert!((b.project(&g).unwrap() - &g).amax() < 1e-12);
        assert!((b.preservation_ratio(&g).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn rank_one_aligned_vector_keeps_norm() {
        let mut rng = RngStream::new(2);
        let b = sample_random_subspace(&mut rng, 5, 1).unwrap();
        let g: DenseVector = b.matrix().column(0) * 3.0;
        assert!((b.project(&g).unwrap().norm() - g.norm()).abs() < 1e-12);
    }

    #[test]
    fn mean_preservation_matches_m_over_n() {
        let mut rng = RngStream::new(3);
        let g = rng.gaussian_vector(100, 1.0).unwrap();
        let trials = 10_000;
        let mean: f64 = (0..trials)
            .map(|_| sample_random_subspace(&mut rng, 100, 10).unwrap().preservation_ratio(&g).unwrap())
            .sum::<f64>()
            / trials as f64;
        assert!((mean - 0.1).abs() < 0.005, "mean {mean}");
    }

    #[test]
    fn preservation_quantile_is_positive() {
        let mut rng = RngStream::new(4);
        let g = rng.gaussian_vector(64, 1.0).unwrap();
        let mut ratios: Vec<f64> = (0..10_000)
            .map(|_| sample_random_subspace(&mut rng, 64, 8).unwrap().preservation_ratio(&g).unwrap())
            .collect();
        ratios.sort_by(f64::total_cmp);
        let q05 = ratios[500];
        let median = ratios[5000];
        assert!(q05 > 0.0);
        // Beta(m/2, (n−m)/2) has mean m/n = 0.125; the bulk sits close to it.
        assert!(q05 > 0.03 && median > 0.09 && median < 0.14, "q05 {q05} median {median}");
    }

    #[test]
    fn in_span_and_orthogonal_vectors() {
        let b = SubspaceBasis::new(DenseMatrix::from_columns(&[e(4, 0), e(4, 2)]), ProjectionMode::Displacement).unwrap();
        let inside = DenseVector::from_vec(vec![1.0, 0.0, -2.0, 0.0]);
        assert_eq!(b.project(&inside).unwrap(), inside);
        assert_eq!(b.preservation_ratio(&inside).unwrap(), 1.0);
        let outside = DenseVector::from_vec(vec![0.0, 3.0, 0.0, 1.0]);
        assert_eq!(b.project(&outside).unwrap().norm(), 0.0);
        assert_eq!(b.preservation_ratio(&outside).unwrap(), 0.0);
        assert!(matches!(b.preservation_ratio(&DenseVector::zeros(4)), Err(Error::UndefinedRatio)));
    }

    #[test]
    fn oversized_subspace_rejected() {
        assert!(sample_random_subspace(&mut RngStream::new(0), 3, 4).is_err());
    }

    #[test]
    fn window_is_fifo() {
        let mut w = GradientWindow::new(1);
        w.push(e(3, 0));
        w.push(e(3, 1));
        w.push(e(3, 2));
        assert_eq!(w.len(), 2);
        let kept: Vec<_> = w.iter().cloned().collect();
        assert_eq!(kept, vec![e(3, 1), e(3, 2)]);
    }

    #[test]
    fn rank_one_covariance_basis() {
        let mut w = GradientWindow::new(3);
        let g = DenseVector::from_vec(vec![1.0, -2.0, 2.0]);
        for _ in 0..3 {
            w.push(g.clone());
        }
        let (b, vals) = covariance_eigenpairs(&w, 1).unwrap();
        let col = b.matrix().column(0).into_owned();
        assert!((col.dot(&g).abs() - g.norm()).abs() < 1e-12);
        assert!((vals[0] - 3.0 * g.norm_squared()).abs() < 1e-10);
    }

    #[test]
    fn weighted_axes_pick_dominant_direction() {
        let mut w = GradientWindow::new(3);
        for _ in 0..3 {
            w.push(e(4, 0));
        }
        w.push(e(4, 1));
        let (b, vals) = covariance_eigenpairs(&w, 1).unwrap();
        assert!((b.matrix().column(0) - e(4, 0)).amax() < 1e-12);
        assert!((vals[0] - 3.0).abs() < 1e-12);
    }

    #[test]
    fn full_rank_request_completes_basis() {
        let mut w = GradientWindow::new(0);
        w.push(DenseVector::from_vec(vec![1.0, 1.0, 0.0, 0.0]));
        let b = covariance_basis(&w, 4).unwrap();
        assert_eq!(b.rank(), 4);
        let g = DenseVector::from_vec(vec![0.3, -1.0, 2.0, 5.0]);
        assert!((b.preservation_ratio(&g).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn zero_window_is_degenerate() {
        let mut w = GradientWindow::new(2);
        assert!(matches!(covariance_basis(&w, 1), Err(Error::DegenerateWindow)));
        w.push(DenseVector::zeros(3));
        assert!(matches!(covariance_basis(&w, 1), Err(Error::DegenerateWindow)));
    }

    #[test]
    fn covariance_basis_maximizes_captured_energy_on_axes() {
        let mut rng = RngStream::new(12);
        for n in 3..=8 {
            let d: Vec<f64> = (0..n).map(|_| 0.1 + rng.uniform() * 5.0).collect();
            let mut w = GradientWindow::new(n);
            for (i, di) in d.iter().enumerate() {
                w.push(e(n, i) * di.sqrt());
            }
            let c = w.covariance().unwrap();
            for m in 1..n {
                let b = covariance_basis(&w, m).unwrap();
                let captured = (b.matrix().transpose() * &c * b.matrix()).trace();
                // Exhaustive search over axis-aligned m-subsets.
                let best = (0u32..(1 << n))
                    .filter(|mask| mask.count_ones() as usize == m)
                    .map(|mask| (0..n).filter(|i| mask & (1 << i) != 0).map(|i| d[i]).sum::<f64>())
                    .fold(f64::MIN, f64::max);
                assert!((captured - best).abs() < 1e-10, "n={n} m={m}");
            }
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn projector_is_orthogonal_projection(seed in 0u64..10_000, n in 2usize..20, frac in 0.05..1.0f64) {
            let m = ((n as f64 * frac).ceil() as usize).clamp(1, n);
            let mut rng = RngStream::new(seed);
            let b = sample_random_subspace(&mut rng, n, m).unwrap();
            let p = b.projector();
            prop_assert!((&p - p.transpose()).amax() < 1e-12);
            prop_assert!((&p * &p - &p).amax() < 1e-10);
            prop_assert!((p.trace() - m as f64).abs() < 1e-8);
            let v = rng.gaussian_vector(n, 1.0).unwrap();
            let pv = b.project(&v).unwrap();
            prop_assert!(pv.norm() <= v.norm() * (1.0 + 1e-12));
            prop_assert!((b.project(&pv).unwrap() - &pv).amax() < 1e-12);
            // ⟨g, Pg⟩ = ‖Pg‖² > 0
            prop_assert!((v.dot(&pv) - pv.norm_squared()).abs() < 1e-10 * v.norm_squared());
            prop_assert!(v.dot(&pv) > 0.0);
        }
    }
}
