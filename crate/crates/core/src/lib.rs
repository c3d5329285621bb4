//! Solvers for the Skorokhod problem on the nonnegative orthant with
//! oblique reflection, the one-projection-per-step discretization scheme,
//! reflected SDE simulation, and an empirical convergence harness.
//!
//! The problem: given a cadlag input path `y` with `y_0` in the orthant and
//! a reflection matrix `Q` (nonnegative, zero diagonal, row and column sums
//! below one), find `x` and a nondecreasing pushing process `k` with
//!
//! ```text
//!   x_t = y_t + (I - Qᵀ) k_t,   x_t >= 0,   ∫ x_j dk_j = 0 .
//! ```
//!
//! The discrete scheme advances with a single positive-part correction per
//! grid step; [`skorokhod::fast_scheme`] is the deterministic driver,
//! [`sde`] contains the stochastic variants, and [`harness`] packages the
//! reproducible experiments behind the `orthant-reflect` binary.

pub mod harness;
pub mod matrix;
pub mod paths;
pub mod projection;
pub mod sde;
pub mod skorokhod;
pub mod vector;

pub use matrix::{MatrixError, ReflectionMatrix};
pub use paths::{GridPath, PathError, StepFunction};
pub use projection::{project, project_fixed_point, ProjectionError, ProjectionResult};
pub use skorokhod::{fast_scheme, SchemeError, SkorokhodSolution};
