//! Miniature SIMP topology optimization.
//!
//! Minimizes compliance `fᵀu(x)` of a 2-D plane-stress structure over element
//! densities `x ∈ [x_min, 1]ⁿ` with `Σ xᵢ ≤ V₀`, where `K(x) u = f` and
//! `K(x) = Σ xᵢ^p Kᵢ`. The solver is a banded Cholesky factorization, which
//! handles grids of a few thousand elements. No sensitivity or density filtering
//! is applied, so optimized fields may show checkerboard patterns.

mod casd;
mod fem;
mod projection;

pub use casd::{
    casd_step, run_casd, uniform_start, CasdConfig, CasdReport, CasdState, CurvatureMode, Schedule, TopologyRun,
};
pub use fem::{element_stiffness, PointLoad, TopologyProblem};
pub use projection::{project_volume, VOLUME_TOLERANCE};
