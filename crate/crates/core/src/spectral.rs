//! Deterministic symmetric eigendecomposition and the spectral operators built
//! on it.
//!
//! Every operator here acts through the eigenbasis: a scalar function `φ` is
//! evaluated on the eigenvalue list and applied as `Σ φ(λᵢ)⟨g, vᵢ⟩vᵢ`. No
//! matrix-function series are formed.
//!
//! - [`filter_gradient`] uses `φ(λ) = 1/√(|λ| + ε)`, which boosts flat and
//!   weakly curved directions relative to steep ones.
//! - [`shaping_operator`] builds the trace-one PSD operator with weights
//!   `wᵢ = |λᵢ|^p / Σⱼ |λⱼ|^p`.
//! - [`regularizer`] builds `R = Σ rᵢ vᵢvᵢᵀ` with the saturating
//!   `rᵢ = |λᵢ|^p / (|λᵢ|^p + δ)`; [`effective_condition_number`] reports the
//!   spread of the shaped spectrum `φ(λᵢ)λᵢ`.

use std::cmp::Ordering;

use nalgebra::SymmetricEigen;

use crate::error::{Error, Result};
use crate::{DenseMatrix, DenseVector};

/// Symmetry tolerance accepted by [`eigh`], relative to `max(1, max|Hᵢⱼ|)`.
pub const SYMMETRY_TOLERANCE: f64 = 1e-10;

/// Default dimension cap for routines that need a dense Hessian eigendecomposition.
pub const DENSE_EIG_LIMIT: usize = 2000;

/// Eigenpairs `(λᵢ, vᵢ)` sorted by ascending eigenvalue, eigenvectors stored
/// as orthonormal columns.
///
/// A decomposition may be partial (fewer pairs than the ambient dimension), as
/// produced by the gradient-covariance routines.
#[derive(Clone, Debug, PartialEq)]
pub struct SpectralDecomposition {
    eigenvalues: DenseVector,
    eigenvectors: DenseMatrix,
}

impl SpectralDecomposition {
    /// Wraps precomputed eigenpairs. Columns of `eigenvectors` must be
    /// orthonormal; only shapes are checked.
    pub fn from_parts(eigenvalues: DenseVector, eigenvectors: DenseMatrix) -> Result<Self> {
        if eigenvalues.len() != eigenvectors.ncols() {
            return Err(Error::DimensionMismatch {
                expected: eigenvectors.ncols(),
                actual: eigenvalues.len(),
            });
        }
        Ok(Self {
            eigenvalues,
            eigenvectors,
        })
    }

    /// Decomposition of `diag(values)` in the standard basis.
    pub fn diagonal(values: &[f64]) -> Self {
        let n = values.len();
        Self {
            eigenvalues: DenseVector::from_column_slice(values),
            eigenvectors: DenseMatrix::identity(n, n),
        }
    }

    pub fn eigenvalues(&self) -> &DenseVector {
        &self.eigenvalues
    }

    pub fn eigenvectors(&self) -> &DenseMatrix {
        &self.eigenvectors
    }

    /// Ambient dimension `n`.
    pub fn dim(&self) -> usize {
        self.eigenvectors.nrows()
    }

    /// Number of stored eigenpairs.
    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    pub fn min_eigenvalue(&self) -> Option<f64> {
        self.eigenvalues.iter().copied().reduce(f64::min)
    }

    /// `Σ φ(λᵢ)⟨g, vᵢ⟩vᵢ`.
    pub fn apply_fn(&self, g: &DenseVector, phi: impl Fn(f64) -> f64) -> Result<DenseVector> {
        if g.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                actual: g.len(),
            });
        }
        let weights = self.eigenvalues.map(phi);
        Ok(apply_weighted(&self.eigenvectors, &weights, g))
    }

    /// Dense `Σ φ(λᵢ) vᵢvᵢᵀ`.
    pub fn operator_matrix(&self, phi: impl Fn(f64) -> f64) -> DenseMatrix {
        weighted_outer(&self.eigenvectors, &self.eigenvalues.map(phi))
    }

    /// `Σ λᵢ vᵢvᵢᵀ`.
    pub fn reconstruct(&self) -> DenseMatrix {
        weighted_outer(&self.eigenvectors, &self.eigenvalues)
    }
}

fn apply_weighted(basis: &DenseMatrix, weights: &DenseVector, g: &DenseVector) -> DenseVector {
    let coeffs = basis.tr_mul(g).component_mul(weights);
    basis * coeffs
}

fn weighted_outer(basis: &DenseMatrix, weights: &DenseVector) -> DenseMatrix {
    let mut scaled = basis.clone();
    for (mut col, w) in scaled.column_iter_mut().zip(weights.iter()) {
        col *= *w;
    }
    scaled * basis.transpose()
}

/// Largest absolute asymmetry `max |Hᵢⱼ − Hⱼᵢ|`.
pub fn asymmetry(h: &DenseMatrix) -> f64 {
    let n = h.nrows();
    let mut worst = 0.0_f64;
    for i in 0..n {
        for j in (i + 1)..n {
            worst = worst.max((h[(i, j)] - h[(j, i)]).abs());
        }
    }
    worst
}

/// Flips `v` so that its largest-magnitude component (first one on ties) is positive.
pub(crate) fn fix_sign(mut v: nalgebra::DVectorViewMut<'_, f64>) {
    let mut best = 0;
    for i in 1..v.len() {
        if v[i].abs() > v[best].abs() {
            best = i;
        }
    }
    if !v.is_empty() && v[best] < 0.0 {
        v.neg_mut();
    }
}

fn lex_desc(a: &[f64], b: &[f64]) -> Ordering {
    for (x, y) in a.iter().zip(b) {
        match y.partial_cmp(x).unwrap_or(Ordering::Equal) {
            Ordering::Equal => continue,
            other => return other,
        }
    }
    Ordering::Equal
}

/// Sorts eigenpairs ascending with the deterministic tie-break: within a run
/// of eigenvalues equal to `tol`, lexicographically larger eigenvectors come
/// first. Signs must already be fixed.
pub(crate) fn sort_pairs(values: &DenseVector, vectors: &DenseMatrix, tol: f64) -> (DenseVector, DenseMatrix) {
    let n = values.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let cols: Vec<Vec<f64>> = (0..n).map(|j| vectors.column(j).iter().copied().collect()).collect();
    let mut start = 0;
    while start < n {
        let mut end = start + 1;
        while end < n && values[order[end]] - values[order[end - 1]] <= tol {
            end += 1;
        }
        order[start..end].sort_by(|&a, &b| lex_desc(&cols[a], &cols[b]));
        start = end;
    }
    let sorted_values = DenseVector::from_iterator(n, order.iter().map(|&i| values[i]));
    let sorted_vectors = DenseMatrix::from_fn(vectors.nrows(), n, |r, c| vectors[(r, order[c])]);
    (sorted_values, sorted_vectors)
}

/// Full eigendecomposition of a symmetric matrix.
///
/// Eigenvalues come out ascending. Each eigenvector is signed so that its
/// largest-magnitude component is positive, and eigenvalues that tie (to
/// `1e-12` relative) are ordered by lexicographically-largest eigenvector
/// first, so subspace selection downstream is reproducible.
pub fn eigh(h: &DenseMatrix) -> Result<SpectralDecomposition> {
    if h.nrows() != h.ncols() {
        return Err(Error::DimensionMismatch {
            expected: h.nrows(),
            actual: h.ncols(),
        });
    }
    if h.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("matrix passed to eigh"));
    }
    let scale = h.amax().max(1.0);
    let asym = asymmetry(h);
    if asym > SYMMETRY_TOLERANCE * scale {
        return Err(Error::NotSymmetric(asym));
    }
    let sym = (h + h.transpose()) * 0.5;
    let SymmetricEigen {
        eigenvalues,
        mut eigenvectors,
    } = SymmetricEigen::new(sym);
    for j in 0..eigenvectors.ncols() {
        fix_sign(eigenvectors.column_mut(j));
    }
    let (values, vectors) = sort_pairs(&eigenvalues, &eigenvectors, 1e-12 * scale);
    Ok(SpectralDecomposition {
        eigenvalues: values,
        eigenvectors: vectors,
    })
}

/// `φ(λ) = 1/√(|λ| + ε)`.
pub fn filter_weight(lambda: f64, epsilon: f64) -> f64 {
    1.0 / (lambda.abs() + epsilon).sqrt()
}

/// Curvature-filtered gradient `Σ φ(λᵢ)⟨g, vᵢ⟩vᵢ` with `φ(λ) = 1/√(|λ| + ε)`.
pub fn filter_gradient(decomp: &SpectralDecomposition, g: &DenseVector, epsilon: f64) -> Result<DenseVector> {
    if !(epsilon > 0.0) {
        return Err(Error::param("epsilon", format!("must be positive, got {epsilon}")));
    }
    decomp.apply_fn(g, |l| filter_weight(l, epsilon))
}

/// Trace-one PSD reweighting `D = Σ wᵢ vᵢvᵢᵀ`, `wᵢ = |λᵢ|^p / Σⱼ |λⱼ|^p`.
#[derive(Clone, Debug, PartialEq)]
pub struct ShapingOperator {
    weights: DenseVector,
    basis: DenseMatrix,
    exponent: f64,
}

impl ShapingOperator {
    pub fn weights(&self) -> &DenseVector {
        &self.weights
    }

    pub fn basis(&self) -> &DenseMatrix {
        &self.basis
    }

    pub fn exponent(&self) -> f64 {
        self.exponent
    }

    pub fn apply(&self, g: &DenseVector) -> Result<DenseVector> {
        if g.len() != self.basis.nrows() {
            return Err(Error::DimensionMismatch {
                expected: self.basis.nrows(),
                actual: g.len(),
            });
        }
        Ok(apply_weighted(&self.basis, &self.weights, g))
    }

    pub fn matrix(&self) -> DenseMatrix {
        weighted_outer(&self.basis, &self.weights)
    }
}

pub fn shaping_operator(decomp: &SpectralDecomposition, p: f64) -> Result<ShapingOperator> {
    if !(p > 0.0) || !p.is_finite() {
        return Err(Error::param("p", format!("must be positive, got {p}")));
    }
    let top = decomp.eigenvalues.amax();
    if top == 0.0 {
        return Err(Error::DegenerateSpectrum("all eigenvalues are zero; shaping weights undefined".into()));
    }
    // Normalizing by the largest |λ| keeps |λ|^p finite for large p.
    let raw = decomp.eigenvalues.map(|l| (l.abs() / top).powf(p));
    let total = raw.sum();
    Ok(ShapingOperator {
        weights: raw / total,
        basis: decomp.eigenvectors.clone(),
        exponent: p,
    })
}

/// `φ(λ) = |λ|^p / (|λ|^p + δ)`, a map `ℝ → [0, 1)`.
pub fn saturation(p: f64, delta: f64) -> impl Fn(f64) -> f64 {
    move |lambda: f64| {
        let a = lambda.abs().powf(p);
        if a == 0.0 {
            0.0
        } else {
            a / (a + delta)
        }
    }
}

/// Spectral regularizer `R = Σ rᵢ vᵢvᵢᵀ` with `rᵢ = |λᵢ|^p / (|λᵢ|^p + δ)`.
#[derive(Clone, Debug, PartialEq)]
pub struct RegularizerOperator {
    coefficients: DenseVector,
    eigenvalues: DenseVector,
    basis: DenseMatrix,
    exponent: f64,
    delta: f64,
}

impl RegularizerOperator {
    pub fn coefficients(&self) -> &DenseVector {
        &self.coefficients
    }

    pub fn basis(&self) -> &DenseMatrix {
        &self.basis
    }

    pub fn exponent(&self) -> f64 {
        self.exponent
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    /// Eigenvalues `rᵢλᵢ` of the shaped operator `R H`.
    pub fn shaped_eigenvalues(&self) -> DenseVector {
        self.coefficients.component_mul(&self.eigenvalues)
    }

    pub fn apply(&self, g: &DenseVector) -> Result<DenseVector> {
        if g.len() != self.basis.nrows() {
            return Err(Error::DimensionMismatch {
                expected: self.basis.nrows(),
                actual: g.len(),
            });
        }
        Ok(apply_weighted(&self.basis, &self.coefficients, g))
    }

    pub fn matrix(&self) -> DenseMatrix {
        weighted_outer(&self.basis, &self.coefficients)
    }

    /// κ_eff of `R H` over its nonzero shaped eigenvalues.
    pub fn effective_condition_number(&self) -> Result<f64> {
        condition_of(self.shaped_eigenvalues().iter().copied())
    }
}

pub fn regularizer(decomp: &SpectralDecomposition, p: f64, delta_reg: f64) -> Result<RegularizerOperator> {
    if !(delta_reg > 0.0) || !delta_reg.is_finite() {
        return Err(Error::param("delta_reg", format!("must be positive, got {delta_reg}")));
    }
    if !(p > 0.0) || !p.is_finite() {
        return Err(Error::param("p", format!("must be positive, got {p}")));
    }
    let phi = saturation(p, delta_reg);
    Ok(RegularizerOperator {
        coefficients: decomp.eigenvalues.map(phi),
        eigenvalues: decomp.eigenvalues.clone(),
        basis: decomp.eigenvectors.clone(),
        exponent: p,
        delta: delta_reg,
    })
}

fn condition_of(shaped: impl Iterator<Item = f64>) -> Result<f64> {
    let (mut max, mut min) = (0.0_f64, f64::INFINITY);
    for s in shaped.map(f64::abs).filter(|s| *s != 0.0) {
        max = max.max(s);
        min = min.min(s);
    }
    if min.is_finite() {
        Ok(max / min)
    } else {
        Err(Error::UndefinedConditionNumber)
    }
}

/// `max |φ(λᵢ)λᵢ| / min |φ(λⱼ)λⱼ|` over the nonzero shaped eigenvalues.
pub fn effective_condition_number(decomp: &SpectralDecomposition, phi: impl Fn(f64) -> f64) -> Result<f64> {
    condition_of(decomp.eigenvalues.iter().map(|&l| phi(l) * l))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RngStream;
    use proptest::prelude::*;

    fn v(xs: &[f64]) -> DenseVector {
        DenseVector::from_column_slice(xs)
    }

    fn random_symmetric(rng: &mut RngStream, n: usize) -> DenseMatrix {
        let a = DenseMatrix::from_fn(n, n, |_, _| rng.standard_normal());
        (&a + a.transpose()) * 0.5
    }

    fn random_orthonormal(rng: &mut RngStream, n: usize) -> DenseMatrix {
        eigh(&random_symmetric(rng, n)).unwrap().eigenvectors().clone()
    }

    #[test]
    fn eigh_diagonal() {
        let d = eigh(&DenseMatrix::from_diagonal(&v(&[1.0, -1.0, -1.0]))).unwrap();
        assert_eq!(d.eigenvalues(), &v(&[-1.0, -1.0, 1.0]));
        // Tie between e2 and e3 is broken lexicographically: e2 = (0,1,0) > (0,0,1).
        assert_eq!(d.eigenvectors().column(0), v(&[0.0, 1.0, 0.0]));
        assert_eq!(d.eigenvectors().column(1), v(&[0.0, 0.0, 1.0]));
    }

    #[test]
    fn eigh_saddle_matrix() {
        let diag: Vec<f64> = (0..12).map(|i| if i < 2 { -1.0 } else { 1.0 }).collect();
        let d = eigh(&DenseMatrix::from_diagonal(&v(&diag))).unwrap();
        assert_eq!(d.eigenvalues().iter().filter(|&&l| l == -1.0).count(), 2);
        assert_eq!(d.eigenvalues().iter().filter(|&&l| l == 1.0).count(), 10);
    }

    #[test]
    fn eigh_random_reconstruction_and_orthonormality() {
        let mut rng = RngStream::new(8);
        let h = random_symmetric(&mut rng, 8);
        let d = eigh(&h).unwrap();
        assert!((d.reconstruct() - &h).norm() <= 1e-10);
        let gram = d.eigenvectors().transpose() * d.eigenvectors();
        assert!((gram - DenseMatrix::identity(8, 8)).amax() < 1e-10);
        for w in d.eigenvalues().as_slice().windows(2) {
            assert!(w[0] <= w[1]);
        }
        for col in d.eigenvectors().column_iter() {
            assert!(col.iter().fold(0.0_f64, |m, x| if x.abs() > m.abs() { *x } else { m }) > 0.0);
        }
    }

    #[test]
    fn eigh_rejects_asymmetric() {
        let h = DenseMatrix::from_row_slice(2, 2, &[1.0, 2.0, 0.0, 1.0]);
        assert!(matches!(eigh(&h), Err(Error::NotSymmetric(_))));
    }

    #[test]
    fn filter_examples() {
        let d = SpectralDecomposition::diagonal(&[-4.0, 1.0]);
        let f = filter_gradient(&d, &v(&[1.0, 1.0]), 1e-12).unwrap();
        assert!((f - v(&[0.5, 1.0])).amax() < 1e-10);

        let id = SpectralDecomposition::diagonal(&[1.0, 1.0, 1.0]);
        let g = v(&[0.3, -2.0, 5.0]);
        assert!((filter_gradient(&id, &g, 1e-12).unwrap() - &g).amax() < 1e-10);

        let zero = SpectralDecomposition::diagonal(&[0.0, 0.0]);
        assert_eq!(filter_gradient(&zero, &v(&[1.0, 2.0]), 1.0).unwrap(), v(&[1.0, 2.0]));

        assert!(filter_gradient(&zero, &v(&[1.0, 2.0]), 0.0).is_err());
    }

    #[test]
    fn shaping_examples() {
        let d = SpectralDecomposition::diagonal(&[-2.0, 1.0, 1.0]);
        let s = shaping_operator(&d, 1.0).unwrap();
        assert!((s.weights() - v(&[0.5, 0.25, 0.25])).amax() < 1e-15);
        assert!((s.matrix().trace() - 1.0).abs() < 1e-12);

        let sharp = shaping_operator(&d, 20.0).unwrap();
        // 2^20 / (2^20 + 2)
        let expected = 1048576.0 / 1048578.0;
        assert!((sharp.weights()[0] - expected).abs() < 1e-12);

        let flat = shaping_operator(&d, 1e-12).unwrap();
        assert!((flat.weights() - DenseVector::from_element(3, 1.0 / 3.0)).amax() < 1e-10);

        let zero = SpectralDecomposition::diagonal(&[0.0, 0.0]);
        assert!(matches!(shaping_operator(&zero, 1.0), Err(Error::DegenerateSpectrum(_))));
    }

    #[test]
    fn shaping_eigen_aligned_gradient() {
        let d = SpectralDecomposition::diagonal(&[3.0, -1.0]);
        let s = shaping_operator(&d, 1.0).unwrap();
        assert_eq!(s.apply(&v(&[0.0, 2.0])).unwrap(), v(&[0.0, 0.5]));
    }

    #[test]
    fn regularizer_examples() {
        let r = regularizer(&SpectralDecomposition::diagonal(&[2.0]), 1.0, 2.0).unwrap();
        assert_eq!(r.coefficients()[0], 0.5);
        let r = regularizer(&SpectralDecomposition::diagonal(&[0.0]), 1.0, 2.0).unwrap();
        assert_eq!(r.coefficients()[0], 0.0);
        let r = regularizer(&SpectralDecomposition::diagonal(&[-3.0]), 1.0, 1e-12).unwrap();
        assert!((r.coefficients()[0] - 1.0).abs() < 1e-12);
        assert!(regularizer(&SpectralDecomposition::diagonal(&[1.0]), 1.0, 0.0).is_err());
    }

    #[test]
    fn condition_number_examples() {
        let d = SpectralDecomposition::diagonal(&[1.0, 100.0]);
        assert_eq!(effective_condition_number(&d, |_| 1.0).unwrap(), 100.0);
        assert!((effective_condition_number(&d, |l| 1.0 / l.abs()).unwrap() - 1.0).abs() < 1e-15);
        let k = effective_condition_number(&d, |l| l.abs() / (l.abs() + 1.0)).unwrap();
        // (10000/101) / (1/2)
        assert!((k - 20000.0 / 101.0).abs() < 1e-10);
        assert!((k - 198.0198).abs() < 1e-4);
        let zero = SpectralDecomposition::diagonal(&[0.0, 0.0]);
        assert!(matches!(
            effective_condition_number(&zero, |_| 1.0),
            Err(Error::UndefinedConditionNumber)
        ));
        let r = regularizer(&d, 1.0, 1.0).unwrap();
        assert!((r.effective_condition_number().unwrap() - 20000.0 / 101.0).abs() < 1e-10);
    }

    #[test]
    fn regularized_operator_spectrum_matches_product() {
        let mut rng = RngStream::new(19);
        for _ in 0..5 {
            let h = random_symmetric(&mut rng, 6);
            let d = eigh(&h).unwrap();
            let r = regularizer(&d, 1.5, 0.7).unwrap();
            let product = r.matrix() * &h;
            let sym = (&product + product.transpose()) * 0.5;
            assert!((&product - &sym).amax() < 1e-10, "R and H commute");
            let got = eigh(&sym).unwrap();
            let mut expected: Vec<f64> = r.shaped_eigenvalues().iter().copied().collect();
            expected.sort_by(f64::total_cmp);
            for (a, b) in got.eigenvalues().iter().zip(&expected) {
                assert!((a - b).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn shaped_quadratic_modes_follow_recursion() {
        let mut rng = RngStream::new(23);
        let n = 7;
        let basis = random_orthonormal(&mut rng, n);
        let lambdas: Vec<f64> = (0..n).map(|_| rng.standard_normal() * 2.0).collect();
        let d = SpectralDecomposition::from_parts(DenseVector::from_vec(lambdas.clone()), basis.clone()).unwrap();
        let h = d.reconstruct();
        let s = shaping_operator(&d, 1.3).unwrap();
        let dm = s.matrix();
        let eta = 0.4;
        let mut x = rng.gaussian_vector(n, 1.0).unwrap();
        let mut beta = basis.tr_mul(&x);
        for _ in 0..25 {
            x = &x - eta * (&dm * (&h * &x));
            for i in 0..n {
                beta[i] *= 1.0 - eta * s.weights()[i] * lambdas[i];
            }
        }
        assert!((basis.tr_mul(&x) - beta).amax() < 1e-10);
    }

    fn spectrum(n: usize) -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(-50.0..50.0f64, n)
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn filter_is_linear(a in -3.0..3.0f64, b in -3.0..3.0f64, seed in 0u64..1000) {
            let mut rng = RngStream::new(seed);
            let d = eigh(&random_symmetric(&mut rng, 5)).unwrap();
            let g1 = rng.gaussian_vector(5, 1.0).unwrap();
            let g2 = rng.gaussian_vector(5, 1.0).unwrap();
            let lhs = filter_gradient(&d, &(a * &g1 + b * &g2), 1e-3).unwrap();
            let rhs = a * filter_gradient(&d, &g1, 1e-3).unwrap() + b * filter_gradient(&d, &g2, 1e-3).unwrap();
            prop_assert!((lhs - rhs).amax() < 1e-10);
        }

        #[test]
        fn shaping_is_psd_with_unit_trace(lambdas in spectrum(6), p in 0.1..4.0f64, seed in 0u64..1000) {
            prop_assume!(lambdas.iter().any(|l| *l != 0.0));
            let mut rng = RngStream::new(seed);
            let d = SpectralDecomposition::from_parts(DenseVector::from_vec(lambdas), random_orthonormal(&mut rng, 6)).unwrap();
            let s = shaping_operator(&d, p).unwrap();
            prop_assert!(s.weights().iter().all(|w| *w >= 0.0));
            prop_assert!((s.weights().sum() - 1.0).abs() < 1e-12);
            let m = s.matrix();
            prop_assert!((m.trace() - 1.0).abs() < 1e-12);
            for _ in 0..10 {
                let z = rng.gaussian_vector(6, 1.0).unwrap();
                prop_assert!(z.dot(&(&m * &z)) >= -1e-14);
            }
        }

        #[test]
        fn regularizer_eigenvalues_in_unit_interval(lambdas in spectrum(6), p in 0.1..4.0f64, delta in 1e-6..1e3f64) {
            let d = SpectralDecomposition::diagonal(&lambdas);
            let r = regularizer(&d, p, delta).unwrap();
            prop_assert!(r.coefficients().iter().all(|c| (0.0..=1.0).contains(c)));
            let m = r.matrix();
            prop_assert!(asymmetry(&m) == 0.0);
        }
    }
}
