//! Projection onto the nonnegative orthant along oblique directions.
//!
//! For a point `z` and reflection matrix `Q`, the projected point is
//! `pi = z + (I - Qᵀ) r̄` where the pushing vector `r̄` is the smallest
//! nonnegative solution of the fixed-point equation
//!
//! ```text
//!   r̄ = [Qᵀ r̄ - z]^+ .
//! ```
//!
//! Two independent iterations compute it:
//!
//! * the pushing iteration `r_{m+1} = [Qᵀ r_m - z]^+` from `r_0 = 0`,
//!   a monotone `col_norm(Q)`-contraction ([`project_fixed_point`]);
//! * the point iteration `z_{m+1} = z_m + (I - Qᵀ)[-z_m]^+` from `z_0 = z`
//!   ([`z_sequence`]), whose iterates are exactly `z + (I - Qᵀ) r_m`.
//!
//! The second route is kept deliberately separate from the first so each can
//! serve as an oracle for the other; [`verify_lemma1`] measures their
//! agreement.

use thiserror::Error;

use crate::matrix::ReflectionMatrix;
use crate::vector;

/// Default stopping tolerance for the pushing iteration.
pub const DEFAULT_TOL: f64 = 1e-12;

/// Extra iterations granted beyond the contraction-rate estimate, covering
/// rounding noise near the fixed point.
const ITER_MARGIN: usize = 16;

#[derive(Debug, Error)]
pub enum ProjectionError {
    #[error("point has a non-finite component {component}")]
    NonFinitePoint { component: usize },
    #[error("point dimension {got} does not match matrix dimension {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("no convergence after {iterations} iterations (last increment {increment})")]
    MaxIterExceeded { iterations: usize, increment: f64 },
}

/// Outcome of a projection solve.
#[derive(Debug, Clone)]
pub struct ProjectionResult {
    /// The input point.
    pub z: Vec<f64>,
    /// The projected point `z + (I - Qᵀ) r_bar`.
    pub pi: Vec<f64>,
    /// The pushing vector solving `r = [Qᵀ r - z]^+`.
    pub r_bar: Vec<f64>,
    /// Number of fixed-point applications performed.
    pub iterations: usize,
    /// `sup_norm(r_bar - [Qᵀ r_bar - z]^+)` at exit.
    pub residual: f64,
}

/// Iteration budget sufficient for the contraction to pass below `tol`
/// starting from `r_0 = 0`, plus a fixed safety margin.
pub fn default_max_iter(q: &ReflectionMatrix, z: &[f64], tol: f64) -> usize {
    let rate = q.col_norm();
    if rate <= 0.0 {
        return 1 + ITER_MARGIN;
    }
    let scale = 1.0 + vector::sup_norm(z);
    let needed = ((tol / scale).ln() / rate.ln()).ceil();
    let needed = if needed.is_finite() && needed > 0.0 {
        needed as usize
    } else {
        1
    };
    needed + ITER_MARGIN
}

/// Solves `r̄ = [Qᵀ r̄ - z]^+` by the monotone pushing iteration and returns
/// the projected point.
///
/// Stops once the increment `sup_norm(r_{m+1} - r_m)` falls to
/// `tol * (1 - col_norm(Q))`, which bounds the distance to the true fixed
/// point by `tol` via the contraction estimate.
pub fn project_fixed_point(
    q: &ReflectionMatrix,
    z: &[f64],
    tol: f64,
    max_iter: usize,
) -> Result<ProjectionResult, ProjectionError> {
    let d = q.dim();
    if z.len() != d {
        return Err(ProjectionError::DimensionMismatch {
            expected: d,
            got: z.len(),
        });
    }
    if let Some(component) = z.iter().position(|v| !v.is_finite()) {
        return Err(ProjectionError::NonFinitePoint { component });
    }
    let threshold = tol * (1.0 - q.col_norm());
    let mut r = vec![0.0; d];
    let mut r_next = vec![0.0; d];
    let mut scratch = vec![0.0; d];
    let mut iterations = 0;
    let mut increment = f64::INFINITY;
    while iterations < max_iter {
        // r_next = [Qᵀ r - z]^+
        q.qt_mul_into(&r, &mut scratch);
        for j in 0..d {
            r_next[j] = (scratch[j] - z[j]).max(0.0);
        }
        iterations += 1;
        increment = vector::sup_norm_diff(&r_next, &r);
        std::mem::swap(&mut r, &mut r_next);
        if increment <= threshold {
            // One more application measures the genuine residual at exit.
            q.qt_mul_into(&r, &mut scratch);
            let mut residual = 0.0_f64;
            for j in 0..d {
                residual = residual.max((r[j] - (scratch[j] - z[j]).max(0.0)).abs());
            }
            let mut pi = vec![0.0; d];
            q.reflect_into(&r, &mut pi);
            for j in 0..d {
                pi[j] += z[j];
            }
            return Ok(ProjectionResult {
                z: z.to_vec(),
                pi,
                r_bar: r,
                iterations,
                residual,
            });
        }
    }
    Err(ProjectionError::MaxIterExceeded {
        iterations,
        increment,
    })
}

/// [`project_fixed_point`] with the default tolerance and iteration budget.
pub fn project(q: &ReflectionMatrix, z: &[f64]) -> Result<ProjectionResult, ProjectionError> {
    project_fixed_point(q, z, DEFAULT_TOL, default_max_iter(q, z, DEFAULT_TOL))
}

/// The point iteration `z_{m+1} = z_m + (I - Qᵀ)[-z_m]^+`, returning
/// `steps + 1` iterates starting with `z_0 = z`.
pub fn z_sequence(q: &ReflectionMatrix, z: &[f64], steps: usize) -> Vec<Vec<f64>> {
    let d = q.dim();
    assert_eq!(z.len(), d, "z_sequence: dimension mismatch");
    let mut out = Vec::with_capacity(steps + 1);
    let mut current = z.to_vec();
    let mut neg = vec![0.0; d];
    let mut push = vec![0.0; d];
    out.push(current.clone());
    for _ in 0..steps {
        for j in 0..d {
            neg[j] = (-current[j]).max(0.0);
        }
        q.reflect_into(&neg, &mut push);
        for j in 0..d {
            current[j] += push[j];
        }
        out.push(current.clone());
    }
    out
}

/// The cumulative form of the point iteration:
/// `z_m = z + (I - Qᵀ) Σ_{i<m} [-z_i]^+`. Algebraically identical to
/// [`z_sequence`]; kept as an internal cross-check on the bookkeeping.
pub fn z_sequence_cumulative(q: &ReflectionMatrix, z: &[f64], steps: usize) -> Vec<Vec<f64>> {
    let d = q.dim();
    assert_eq!(z.len(), d, "z_sequence_cumulative: dimension mismatch");
    let mut out = Vec::with_capacity(steps + 1);
    let mut sum = vec![0.0; d];
    let mut reflected = vec![0.0; d];
    out.push(z.to_vec());
    for m in 0..steps {
        let prev = &out[m];
        for j in 0..d {
            sum[j] += (-prev[j]).max(0.0);
        }
        q.reflect_into(&sum, &mut reflected);
        out.push((0..d).map(|j| z[j] + reflected[j]).collect());
    }
    out
}

/// Maximum discrepancy over `m = 0..=steps` between the pushing route
/// `z + (I - Qᵀ) r_m` and the point iteration `z_m`. Exact arithmetic gives
/// zero; floating point leaves rounding noise only.
pub fn verify_lemma1(q: &ReflectionMatrix, z: &[f64], steps: usize) -> f64 {
    let d = q.dim();
    assert_eq!(z.len(), d, "verify_lemma1: dimension mismatch");
    let zs = z_sequence(q, z, steps);
    let mut r = vec![0.0; d];
    let mut scratch = vec![0.0; d];
    let mut via_push = vec![0.0; d];
    let mut worst = 0.0_f64;
    for zm in zs.iter().take(steps + 1) {
        q.reflect_into(&r, &mut via_push);
        for j in 0..d {
            via_push[j] += z[j];
        }
        worst = worst.max(vector::sup_norm_diff(&via_push, zm));
        // advance r_{m+1} = [Qᵀ r_m - z]^+
        q.qt_mul_into(&r, &mut scratch);
        for j in 0..d {
            r[j] = (scratch[j] - z[j]).max(0.0);
        }
    }
    worst
}
