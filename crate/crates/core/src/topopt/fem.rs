//! Bilinear-quad plane-stress finite elements with SIMP interpolation.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::{DenseMatrix, DenseVector};

/// Stiffness of a unit-square bilinear quadrilateral in plane stress.
///
/// Nodes run counter-clockwise from `(0,0)`: `(0,0), (1,0), (1,1), (0,1)`;
/// DOFs are `(u_x, u_y)` per node in that order. Entries are the closed-form
/// integrals of `BᵀDB` over the square.
pub fn element_stiffness(young: f64, nu: f64) -> Result<DenseMatrix> {
    if !(young > 0.0 && young.is_finite()) {
        return Err(Error::InvalidMaterial(format!("Young's modulus must be positive, got {young}")));
    }
    if !(0.0..0.5).contains(&nu) {
        return Err(Error::InvalidMaterial(format!("Poisson ratio must lie in [0, 0.5), got {nu}")));
    }
    let k = [
        0.5 - nu / 6.0,
        0.125 + nu / 8.0,
        -0.25 - nu / 12.0,
        -0.125 + 3.0 * nu / 8.0,
        -0.25 + nu / 12.0,
        -0.125 - nu / 8.0,
        nu / 6.0,
        0.125 - 3.0 * nu / 8.0,
    ];
    const LAYOUT: [[usize; 8]; 8] = [
        [0, 1, 2, 3, 4, 5, 6, 7],
        [1, 0, 7, 6, 5, 4, 3, 2],
        [2, 7, 0, 5, 6, 3, 4, 1],
        [3, 6, 5, 0, 7, 2, 1, 4],
        [4, 5, 6, 7, 0, 1, 2, 3],
        [5, 4, 3, 2, 1, 0, 7, 6],
        [6, 3, 4, 1, 2, 7, 0, 5],
        [7, 2, 1, 4, 3, 6, 5, 0],
    ];
    let scale = young / (1.0 - nu * nu);
    Ok(DenseMatrix::from_fn(8, 8, |i, j| scale * k[LAYOUT[i][j]]))
}

/// A point load on one global DOF.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PointLoad {
    pub dof: usize,
    pub value: f64,
}

/// SIMP compliance problem on an `nx × ny` grid of unit square elements.
///
/// Node `(i, j)` sits at `x = i`, `y = j` (y up) and has index `i·(ny+1) + j`;
/// its DOFs are `2·index` (horizontal) and `2·index + 1` (vertical). Element
/// `(ex, ey)` has index `ey·nx + ex`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TopologyProblem {
    pub nx: usize,
    pub ny: usize,
    #[serde(default = "default_young")]
    pub young: f64,
    #[serde(default = "default_poisson")]
    pub poisson: f64,
    #[serde(default = "default_penal")]
    pub penal: f64,
    /// Material budget `V₀` on `Σ xᵢ`.
    pub volume: f64,
    pub loads: Vec<PointLoad>,
    pub fixed_dofs: Vec<usize>,
    #[serde(default = "default_x_min")]
    pub x_min: f64,
}

fn default_young() -> f64 {
    1.0
}
fn default_poisson() -> f64 {
    0.3
}
fn default_penal() -> f64 {
    3.0
}
fn default_x_min() -> f64 {
    1e-3
}

/// Cached per-problem data: element matrix, DOF maps.
struct Layout {
    ke: DenseMatrix,
    edofs: Vec<[usize; 8]>,
    free: Vec<usize>,
    /// Global DOF → position among free DOFs.
    free_index: Vec<Option<usize>>,
    /// Largest `|i - j|` between coupled free DOFs.
    bandwidth: usize,
}

/// Lower triangle of a symmetric banded matrix, row `i` holding columns
/// `i - b ..= i`.
struct BandMatrix {
    n: usize,
    b: usize,
    data: Vec<f64>,
}

impl BandMatrix {
    fn zeros(n: usize, b: usize) -> Self {
        Self {
            n,
            b,
            data: vec![0.0; n * (b + 1)],
        }
    }

    fn at(&self, i: usize, j: usize) -> usize {
        i * (self.b + 1) + j + self.b - i
    }

    fn add(&mut self, i: usize, j: usize, v: f64) {
        let k = self.at(i, j);
        self.data[k] += v;
    }

    /// In-place banded Cholesky followed by the two triangular solves.
    /// Returns `None` when a pivot is not clearly positive: rounding can let
    /// an unsupported rigid-body mode through with a tiny pivot instead of a
    /// failed factorization.
    fn cholesky_solve(mut self, mut rhs: DenseVector) -> Option<DenseVector> {
        let (n, b) = (self.n, self.b);
        let scale = (0..n).map(|i| self.data[self.at(i, i)]).fold(0.0, f64::max);
        for j in 0..n {
            let lo = j.saturating_sub(b);
            let mut d = self.data[self.at(j, j)];
            for k in lo..j {
                d -= self.data[self.at(j, k)].powi(2);
            }
            if !(d > 1e-12 * scale) {
                return None;
            }
            let d = d.sqrt();
            let jj = self.at(j, j);
            self.data[jj] = d;
            for i in j + 1..n.min(j + b + 1) {
                let mut v = self.data[self.at(i, j)];
                for k in i.saturating_sub(b)..j {
                    v -= self.data[self.at(i, k)] * self.data[self.at(j, k)];
                }
                let ij = self.at(i, j);
                self.data[ij] = v / d;
            }
        }
        for i in 0..n {
            let mut v = rhs[i];
            for k in i.saturating_sub(b)..i {
                v -= self.data[self.at(i, k)] * rhs[k];
            }
            rhs[i] = v / self.data[self.at(i, i)];
        }
        for i in (0..n).rev() {
            let mut v = rhs[i];
            for k in i + 1..n.min(i + b + 1) {
                v -= self.data[self.at(k, i)] * rhs[k];
            }
            rhs[i] = v / self.data[self.at(i, i)];
        }
        Some(rhs)
    }
}

impl TopologyProblem {
    /// Cantilever with the left edge clamped and a unit downward load at the
    /// middle of the right edge; budget `volume_fraction · nx · ny`.
    pub fn cantilever(nx: usize, ny: usize, volume_fraction: f64) -> Result<Self> {
        if nx == 0 || ny == 0 {
            return Err(Error::InvalidDimension("grid must have at least one element".into()));
        }
        let fixed_dofs = (0..=ny).flat_map(|j| [2 * j, 2 * j + 1]).collect();
        let tip = nx * (ny + 1) + ny / 2;
        let p = Self {
            nx,
            ny,
            young: default_young(),
            poisson: default_poisson(),
            penal: default_penal(),
            volume: volume_fraction * (nx * ny) as f64,
            loads: vec![PointLoad {
                dof: 2 * tip + 1,
                value: -1.0,
            }],
            fixed_dofs,
            x_min: default_x_min(),
        };
        p.validate()?;
        Ok(p)
    }

    pub fn element_count(&self) -> usize {
        self.nx * self.ny
    }

    pub fn dof_count(&self) -> usize {
        2 * (self.nx + 1) * (self.ny + 1)
    }

    pub fn node_index(&self, i: usize, j: usize) -> usize {
        i * (self.ny + 1) + j
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.element_count();
        if n == 0 {
            return Err(Error::InvalidDimension("grid must have at least one element".into()));
        }
        element_stiffness(self.young, self.poisson)?;
        if !(self.penal >= 1.0 && self.penal.is_finite()) {
            return Err(Error::param("penal", format!("must be at least 1, got {}", self.penal)));
        }
        if !(self.x_min > 0.0 && self.x_min < 1.0) {
            return Err(Error::param("x_min", format!("must lie in (0, 1), got {}", self.x_min)));
        }
        if !(self.volume <= n as f64 && self.volume >= n as f64 * self.x_min) {
            return Err(Error::InvalidBudget {
                budget: self.volume,
                n,
                x_min: self.x_min,
            });
        }
        let dofs = self.dof_count();
        if self.fixed_dofs.is_empty() {
            return Err(Error::IllPosedBoundary);
        }
        if let Some(&d) = self.fixed_dofs.iter().chain(self.loads.iter().map(|l| &l.dof)).find(|&&d| d >= dofs) {
            return Err(Error::InvalidSpec(format!("DOF {d} outside 0..{dofs}")));
        }
        if self.loads.iter().any(|l| !l.value.is_finite()) {
            return Err(Error::InvalidSpec("load values must be finite".into()));
        }
        Ok(())
    }

    pub fn load_json(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let p: Self = serde_json::from_str(&text).map_err(|e| Error::schema(path, e.to_string()))?;
        p.validate()?;
        Ok(p)
    }

    pub fn save_json(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self).map_err(|e| Error::schema(path, e.to_string()))?;
        std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
    }

    /// Global load vector.
    pub fn load_vector(&self) -> DenseVector {
        let mut f = DenseVector::zeros(self.dof_count());
        for l in &self.loads {
            f[l.dof] += l.value;
        }
        f
    }

    /// Global DOFs of element `(ex, ey)` in [`element_stiffness`] order.
    pub fn element_dofs(&self, ex: usize, ey: usize) -> [usize; 8] {
        let nodes = [
            self.node_index(ex, ey),
            self.node_index(ex + 1, ey),
            self.node_index(ex + 1, ey + 1),
            self.node_index(ex, ey + 1),
        ];
        let mut d = [0; 8];
        for (a, &n) in nodes.iter().enumerate() {
            d[2 * a] = 2 * n;
            d[2 * a + 1] = 2 * n + 1;
        }
        d
    }

    fn layout(&self) -> Result<Layout> {
        self.validate()?;
        let ke = element_stiffness(self.young, self.poisson)?;
        let mut edofs = Vec::with_capacity(self.element_count());
        for ey in 0..self.ny {
            for ex in 0..self.nx {
                edofs.push(self.element_dofs(ex, ey));
            }
        }
        let mut fixed = vec![false; self.dof_count()];
        for &d in &self.fixed_dofs {
            fixed[d] = true;
        }
        let free: Vec<usize> = (0..self.dof_count()).filter(|&d| !fixed[d]).collect();
        let mut free_index = vec![None; self.dof_count()];
        for (i, &d) in free.iter().enumerate() {
            free_index[d] = Some(i);
        }
        let bandwidth = edofs
            .iter()
            .map(|dofs| {
                let idx = dofs.iter().filter_map(|&d| free_index[d]);
                let (lo, hi) = idx.fold((usize::MAX, 0), |(lo, hi), i| (lo.min(i), hi.max(i)));
                hi.saturating_sub(lo)
            })
            .max()
            .unwrap_or(0);
        Ok(Layout {
            ke,
            edofs,
            free,
            free_index,
            bandwidth,
        })
    }

    fn check_densities(&self, x: &DenseVector) -> Result<()> {
        if x.len() != self.element_count() {
            return Err(Error::DimensionMismatch {
                expected: self.element_count(),
                actual: x.len(),
            });
        }
        // Densities slightly outside the box are allowed for finite-difference probes.
        if x.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(Error::param("densities", "must be positive and finite"));
        }
        Ok(())
    }

    /// Full global stiffness `K(x) = Σ xₑ^p Kₑ` (fixed DOFs included).
    pub fn global_stiffness(&self, x: &DenseVector) -> Result<DenseMatrix> {
        self.check_densities(x)?;
        let lay = self.layout()?;
        let n = self.dof_count();
        let mut k = DenseMatrix::zeros(n, n);
        for (e, dofs) in lay.edofs.iter().enumerate() {
            let s = x[e].powf(self.penal);
            for a in 0..8 {
                for b in 0..8 {
                    k[(dofs[a], dofs[b])] += s * lay.ke[(a, b)];
                }
            }
        }
        Ok(k)
    }

    /// Solves `K(x) u = f` with fixed DOFs held at zero.
    pub fn assemble_and_solve(&self, x: &DenseVector) -> Result<DenseVector> {
        self.check_densities(x)?;
        let lay = self.layout()?;
        let nf = lay.free.len();
        if nf == 0 {
            return Ok(DenseVector::zeros(self.dof_count()));
        }
        let mut k = BandMatrix::zeros(nf, lay.bandwidth);
        for (e, dofs) in lay.edofs.iter().enumerate() {
            let s = x[e].powf(self.penal);
            for a in 0..8 {
                let Some(i) = lay.free_index[dofs[a]] else { continue };
                for (b, &db) in dofs.iter().enumerate() {
                    match lay.free_index[db] {
                        Some(j) if j <= i => k.add(i, j, s * lay.ke[(a, b)]),
                        _ => {}
                    }
                }
            }
        }
        let f = self.load_vector();
        let rhs = DenseVector::from_iterator(nf, lay.free.iter().map(|&d| f[d]));
        let uf = k.cholesky_solve(rhs).ok_or(Error::IllPosedBoundary)?;
        let mut u = DenseVector::zeros(self.dof_count());
        for (i, &d) in lay.free.iter().enumerate() {
            u[d] = uf[i];
        }
        Ok(u)
    }

    /// Compliance `C = fᵀu` and its gradient
    /// `∂C/∂xₑ = -p xₑ^{p-1} uₑᵀ Kₑ uₑ`.
    pub fn compliance_and_sensitivity(&self, x: &DenseVector) -> Result<(f64, DenseVector)> {
        let u = self.assemble_and_solve(x)?;
        let lay = self.layout()?;
        let c = self.load_vector().dot(&u);
        let mut ue = DenseVector::zeros(8);
        let sens = DenseVector::from_iterator(
            lay.edofs.len(),
            lay.edofs.iter().enumerate().map(|(e, dofs)| {
                for a in 0..8 {
                    ue[a] = u[dofs[a]];
                }
                let energy = ue.dot(&(&lay.ke * &ue));
                -self.penal * x[e].powf(self.penal - 1.0) * energy
            }),
        );
        Ok((c, sens))
    }

    /// `Σ xₑ`.
    pub fn volume_of(&self, x: &DenseVector) -> f64 {
        x.sum()
    }

    /// Densities on the grid, `ny` rows (top row first) by `nx` columns.
    pub fn density_grid(&self, x: &DenseVector) -> Vec<Vec<f64>> {
        (0..self.ny)
            .rev()
            .map(|ey| (0..self.nx).map(|ex| x[ey * self.nx + ex]).collect())
            .collect()
    }

    /// Writes [`Self::density_grid`] as a header-less CSV.
    pub fn write_density_csv(&self, x: &DenseVector, path: &Path) -> Result<()> {
        let to_err = |e: csv::Error| Error::schema(path, e.to_string());
        let mut w = csv::WriterBuilder::new().has_headers(false).from_path(path).map_err(to_err)?;
        for row in self.density_grid(x) {
            w.write_record(row.iter().map(|v| v.to_string())).map_err(to_err)?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }
}
