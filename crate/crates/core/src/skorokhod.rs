//! The Skorokhod problem on the orthant and its one-projection-per-step
//! discretization.
//!
//! For an input grid path `y` (density `n`, `y_0` in the orthant) the scheme
//! advances the pushing process `k` with a single positive-part evaluation
//! per step:
//!
//! ```text
//!   k_{i+1} = k_i + [-(x_i + Δy_{i+1})]^+
//!   x_{i+1} = y_{i+1} + (I - Qᵀ) k_{i+1}
//! ```
//!
//! equivalently `k_{i+1} = [Qᵀ k_i - y_{i+1}]^+ ∨ k_i`; both forms are
//! computed and compared when debug assertions are on. The scheme output is
//! the unique solution of the delayed fixed-point equation
//!
//! ```text
//!   k = F(delay(k)),   F(u)_t = sup_{s<=t} [Qᵀ u_s - y_s]^+ ,
//! ```
//!
//! which [`fixed_point_gap`] measures directly. Undelayed Picard iteration
//! of `F` ([`fixed_point_oracle`]) instead converges to the exact solution
//! for the discretized input and serves as the reference in error bounds.
//!
//! The error of the scheme against the exact solution is controlled by the
//! input's modulus of continuity, and the solution map is Lipschitz in the
//! input; [`check_theorem3`] and [`check_theorem4`] evaluate those bounds
//! with explicit constants.

use std::io::{self, BufRead, Write};

use thiserror::Error;

use crate::matrix::ReflectionMatrix;
use crate::paths::{sup_distance, GridPath, PathError, StepFunction};
use crate::projection::{self, ProjectionError};
use crate::vector;

/// Tolerance for the per-step agreement of the two scheme forms when debug
/// assertions are enabled.
#[cfg(debug_assertions)]
const FORM_AGREEMENT_TOL: f64 = 1e-14;

/// Default Picard tolerance for [`fixed_point_oracle`].
pub const ORACLE_TOL: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum SchemeError {
    #[error("input path starts outside the orthant: component {component} = {value}")]
    StartOutsideOrthant { component: usize, value: f64 },
    #[error("matrix dimension {matrix} does not match path dimension {path}")]
    DimensionMismatch { matrix: usize, path: usize },
    #[error("reference density {reference} is not an integer multiple of scheme density {scheme}")]
    DensityNotNested { scheme: u32, reference: u32 },
    #[error("Picard iteration did not converge after {sweeps} sweeps (last change {change})")]
    MaxIterExceeded { sweeps: usize, change: f64 },
    #[error(transparent)]
    Projection(#[from] ProjectionError),
    #[error(transparent)]
    Path(#[from] PathError),
}

/// A solution pair on the input grid: the reflected path `x` and the
/// nondecreasing pushing process `k` with `k_0 = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct SkorokhodSolution {
    pub x: GridPath,
    pub k: GridPath,
}

/// One bound evaluation: `lhs <= constant * scale = rhs`.
#[derive(Debug, Clone, Copy)]
pub struct BoundReport {
    pub lhs: f64,
    pub constant: f64,
    /// The driving quantity the constant multiplies (a modulus of
    /// continuity or an input sup-distance).
    pub scale: f64,
    pub rhs: f64,
    pub pass: bool,
}

impl BoundReport {
    fn new(lhs: f64, constant: f64, scale: f64) -> Self {
        let rhs = constant * scale;
        BoundReport {
            lhs,
            constant,
            scale,
            rhs,
            pass: lhs <= rhs,
        }
    }
}

/// Stability comparison of two scheme runs ([`check_theorem4`]).
#[derive(Debug, Clone, Copy)]
pub struct StabilityReport {
    /// `sup |k¹ - k²| <= sup |y¹ - y²| / (1 - q)`.
    pub k_bound: BoundReport,
    /// `sup |k¹ - k²| + sup |x¹ - x²| <= 3 sup |y¹ - y²| / (1 - q)`.
    pub combined: BoundReport,
    pub pass: bool,
}

/// Verification summary of a solution against its input.
#[derive(Debug, Clone, Copy)]
pub struct SolutionDiagnostics {
    /// `max_i sup_norm(F(delay(k))_i - k_i)`: distance from the delayed
    /// fixed-point characterisation. Rounding-level for genuine outputs.
    pub fixed_point_gap: f64,
    /// `max_i sup_norm(x_i - (y_i + (I - Qᵀ) k_i))`. Zero by construction
    /// for scheme outputs.
    pub reconstruction_gap: f64,
    /// Componentwise monotonicity of `k` with `k_0 = 0`.
    pub k_monotone: bool,
    /// `sup |k| (1 - q) <= sup |y|` with rounding slack.
    pub pushing_bounded: bool,
}

impl SolutionDiagnostics {
    pub fn clean(&self, tol: f64) -> bool {
        self.fixed_point_gap <= tol
            && self.reconstruction_gap <= tol
            && self.k_monotone
            && self.pushing_bounded
    }
}

fn check_input(q: &ReflectionMatrix, y: &GridPath) -> Result<(), SchemeError> {
    if q.dim() != y.dim() {
        return Err(SchemeError::DimensionMismatch {
            matrix: q.dim(),
            path: y.dim(),
        });
    }
    let start = y.at(0);
    if let Some(component) = start.iter().position(|&v| v < 0.0) {
        return Err(SchemeError::StartOutsideOrthant {
            component,
            value: start[component],
        });
    }
    Ok(())
}

/// Runs the one-correction-per-step scheme over the whole grid.
///
/// With debug assertions enabled every step additionally evaluates the
/// running-maximum form of the `k` update and the incremental form of the
/// `x` update and asserts agreement to `1e-14` relative; release builds pay
/// only the single positive part per step.
pub fn fast_scheme(
    q: &ReflectionMatrix,
    y: &GridPath,
) -> Result<SkorokhodSolution, SchemeError> {
    check_input(q, y)?;
    let d = y.dim();
    let points = y.points();
    let mut xs = Vec::with_capacity(points * d);
    let mut ks = Vec::with_capacity(points * d);
    xs.extend_from_slice(y.at(0));
    ks.extend(std::iter::repeat(0.0).take(d));

    let mut corr = vec![0.0; d];
    let mut k_next = vec![0.0; d];
    let mut scratch = vec![0.0; d];
    for i in 0..y.steps() {
        let y_next = y.at(i + 1);
        let x_cur = &xs[i * d..(i + 1) * d];
        let k_cur = &ks[i * d..(i + 1) * d];
        for j in 0..d {
            let dy = y_next[j] - y.at(i)[j];
            corr[j] = (-(x_cur[j] + dy)).max(0.0);
        }
        for j in 0..d {
            k_next[j] = k_cur[j] + corr[j];
        }

        #[cfg(debug_assertions)]
        {
            // Running-maximum form of the same update.
            q.qt_mul_into(k_cur, &mut scratch);
            let scale = 1.0 + vector::sup_norm(&k_next) + vector::sup_norm(y_next);
            for j in 0..d {
                let alt = (scratch[j] - y_next[j]).max(0.0).max(k_cur[j]);
                debug_assert!(
                    (alt - k_next[j]).abs() <= FORM_AGREEMENT_TOL * scale,
                    "k update forms disagree at step {i}, component {j}: {alt} vs {}",
                    k_next[j]
                );
            }
        }

        q.qt_mul_into(&k_next, &mut scratch);
        let base = xs.len();
        for j in 0..d {
            xs.push(y_next[j] + (k_next[j] - scratch[j]));
        }

        #[cfg(debug_assertions)]
        {
            // Incremental form of the x update.
            q.reflect_into(&corr, &mut scratch);
            let scale = 1.0
                + vector::sup_norm(&xs[base..base + d])
                + vector::sup_norm(&k_next)
                + vector::sup_norm(y_next);
            for j in 0..d {
                let dy = y_next[j] - y.at(i)[j];
                let alt = xs[base - d + j] + dy + scratch[j];
                debug_assert!(
                    (alt - xs[base + j]).abs() <= FORM_AGREEMENT_TOL * scale,
                    "x update forms disagree at step {i}, component {j}: {alt} vs {}",
                    xs[base + j]
                );
            }
        }
        let _ = base;
        ks.extend_from_slice(&k_next);
    }

    let solution = SkorokhodSolution {
        x: GridPath::from_values(y.density(), y.horizon(), d, xs)?,
        k: GridPath::from_values(y.density(), y.horizon(), d, ks)?,
    };
    debug_assert!(
        fixed_point_gap(q, y, &solution.k).unwrap_or(f64::INFINITY)
            <= 1e-12 * (1.0 + vector::sup_norm(solution.k.last())),
        "scheme output drifted from its fixed-point characterisation"
    );
    Ok(solution)
}

/// Distance of a candidate pushing path from the delayed fixed-point
/// equation: `max_i sup_norm(F(delay(k))_i - k_i)` with
/// `F(u)_i = max_{j<=i} [Qᵀ u_j - y_j]^+` and the delay keeping index 0.
pub fn fixed_point_gap(
    q: &ReflectionMatrix,
    y: &GridPath,
    k: &GridPath,
) -> Result<f64, SchemeError> {
    check_input(q, y)?;
    if k.dim() != y.dim() || k.density() != y.density() {
        return Err(SchemeError::Path(PathError::DensityMismatch {
            left: k.density(),
            right: y.density(),
        }));
    }
    let d = y.dim();
    let delayed = k.delay_one_step();
    let mut running = vec![0.0_f64; d];
    let mut scratch = vec![0.0; d];
    let mut gap = 0.0_f64;
    for i in 0..y.points().min(k.points()) {
        q.qt_mul_into(delayed.at(i), &mut scratch);
        let yi = y.at(i);
        for j in 0..d {
            running[j] = running[j].max((scratch[j] - yi[j]).max(0.0));
        }
        gap = gap.max(vector::sup_norm_diff(&running, k.at(i)));
    }
    Ok(gap)
}

/// Picard iteration of the undelayed fixed point `k = F(k)` on the grid.
///
/// This converges to the exact Skorokhod solution of the discretized input
/// (no one-step lag), which makes it the reference oracle for the scheme's
/// error bounds. The iteration contracts at rate `col_norm(Q)` per sweep.
pub fn fixed_point_oracle(
    q: &ReflectionMatrix,
    y: &GridPath,
    tol: f64,
) -> Result<SkorokhodSolution, SchemeError> {
    check_input(q, y)?;
    let d = y.dim();
    let points = y.points();
    let rate = q.col_norm();
    let threshold = tol * (1.0 - rate);
    let sup_y = (0..points).fold(0.0_f64, |m, i| m.max(vector::sup_norm(y.at(i))));
    let max_sweeps = if rate <= 0.0 {
        2 + 8
    } else {
        let scale = 1.0 + sup_y / (1.0 - rate);
        let needed = ((threshold / scale).ln() / rate.ln()).ceil();
        (if needed.is_finite() && needed > 0.0 {
            needed as usize
        } else {
            2
        }) + 32
    };

    let mut u = vec![0.0; points * d];
    let mut u_next = vec![0.0; points * d];
    let mut running = vec![0.0_f64; d];
    let mut scratch = vec![0.0; d];
    let mut sweeps = 0;
    let mut change = f64::INFINITY;
    while sweeps < max_sweeps {
        for r in running.iter_mut() {
            *r = 0.0;
        }
        change = 0.0;
        for i in 0..points {
            q.qt_mul_into(&u[i * d..(i + 1) * d], &mut scratch);
            let yi = y.at(i);
            for j in 0..d {
                running[j] = running[j].max((scratch[j] - yi[j]).max(0.0));
                let delta = (running[j] - u[i * d + j]).abs();
                if delta > change {
                    change = delta;
                }
                u_next[i * d + j] = running[j];
            }
        }
        std::mem::swap(&mut u, &mut u_next);
        sweeps += 1;
        if change <= threshold {
            let mut xs = Vec::with_capacity(points * d);
            for i in 0..points {
                q.qt_mul_into(&u[i * d..(i + 1) * d], &mut scratch);
                let yi = y.at(i);
                for j in 0..d {
                    xs.push(yi[j] + (u[i * d + j] - scratch[j]));
                }
            }
            return Ok(SkorokhodSolution {
                x: GridPath::from_values(y.density(), y.horizon(), d, xs)?,
                k: GridPath::from_values(y.density(), y.horizon(), d, u)?,
            });
        }
    }
    Err(SchemeError::MaxIterExceeded { sweeps, change })
}

/// Exact solution for a step-function input: one oblique projection per
/// jump, constant in between. Returns `(x, k)` on the input's jump times.
pub fn step_function_exact(
    q: &ReflectionMatrix,
    y: &StepFunction,
) -> Result<(StepFunction, StepFunction), SchemeError> {
    if q.dim() != y.dim() {
        return Err(SchemeError::DimensionMismatch {
            matrix: q.dim(),
            path: y.dim(),
        });
    }
    let d = y.dim();
    let start = y.segment(0);
    if let Some(component) = start.iter().position(|&v| v < 0.0) {
        return Err(SchemeError::StartOutsideOrthant {
            component,
            value: start[component],
        });
    }
    let mut xs = Vec::with_capacity(y.segments() * d);
    let mut ks = Vec::with_capacity(y.segments() * d);
    xs.extend_from_slice(start);
    ks.extend(std::iter::repeat(0.0).take(d));
    for seg in 1..y.segments() {
        let prev_x = xs[(seg - 1) * d..seg * d].to_vec();
        let prev_k = ks[(seg - 1) * d..seg * d].to_vec();
        let cur = y.segment(seg);
        let before = y.segment(seg - 1);
        let z: Vec<f64> = (0..d)
            .map(|j| prev_x[j] + (cur[j] - before[j]))
            .collect();
        let proj = projection::project(q, &z)?;
        xs.extend_from_slice(&proj.pi);
        for j in 0..d {
            ks.push(prev_k[j] + proj.r_bar[j]);
        }
    }
    let times = y.jump_times().to_vec();
    Ok((
        StepFunction::new(times.clone(), d, xs)?,
        StepFunction::new(times, d, ks)?,
    ))
}

/// The classical one-dimensional reflection map for normal reflection
/// (`Q = [0]`): `k_i = max_{j<=i} [-y_j]^+` and `x_i = y_i + k_i`.
///
/// Kept as an independent closed form; the scheme must reproduce it without
/// any lag because `F` does not depend on `k` when `Q = 0`.
pub fn running_max_map_1d(y: &GridPath) -> Result<SkorokhodSolution, SchemeError> {
    if y.dim() != 1 {
        return Err(SchemeError::DimensionMismatch {
            matrix: 1,
            path: y.dim(),
        });
    }
    if y.at(0)[0] < 0.0 {
        return Err(SchemeError::StartOutsideOrthant {
            component: 0,
            value: y.at(0)[0],
        });
    }
    let points = y.points();
    let mut ks = Vec::with_capacity(points);
    let mut xs = Vec::with_capacity(points);
    let mut running = 0.0_f64;
    for i in 0..points {
        let v = y.at(i)[0];
        running = running.max(-v);
        ks.push(running.max(0.0));
        xs.push(v + ks[i]);
    }
    Ok(SkorokhodSolution {
        x: GridPath::from_values(y.density(), y.horizon(), 1, xs)?,
        k: GridPath::from_values(y.density(), y.horizon(), 1, ks)?,
    })
}

/// Explicit constant for the modulus error bound, assembled from the
/// three-term contraction estimate in the convergence proof:
/// the pushing error obeys `sup|k^n - k| <= ω / (1-q)²`, and the state
/// reconstruction adds `sup|x^n - x| <= ω + (1+q) sup|k^n - k|`, so the
/// summed left side is bounded by `(1 + (2+q)/(1-q)²) ω`.
pub fn theorem3_constant(q: &ReflectionMatrix) -> f64 {
    let c = q.col_norm();
    1.0 + (2.0 + c) / ((1.0 - c) * (1.0 - c))
}

/// Evaluates the modulus error bound for the scheme at the input's density
/// against a reference solution on a nested finer grid:
///
/// ```text
///   sup_{s<=t} |x^n_s - x_s| + sup_{s<=t} |k^n_s - k_s|
///       <= theorem3_constant(Q) * ω_{1/n}(y, [0, t]) .
/// ```
///
/// The sup runs over the reference grid (both sides are constant between
/// its points); the modulus is computed from the scheme-density input.
pub fn check_theorem3(
    q: &ReflectionMatrix,
    y: &GridPath,
    reference: &SkorokhodSolution,
    t: f64,
) -> Result<BoundReport, SchemeError> {
    let sol = fast_scheme(q, y)?;
    let ref_n = reference.x.density();
    let n = y.density();
    if ref_n < n || ref_n % n != 0 {
        return Err(SchemeError::DensityNotNested {
            scheme: n,
            reference: ref_n,
        });
    }
    if reference.x.dim() != y.dim() {
        return Err(SchemeError::Path(PathError::DimensionMismatch {
            left: reference.x.dim(),
            right: y.dim(),
        }));
    }
    let ratio = (ref_n / n) as usize;
    let last = reference.x.grid_index(t);
    let mut x_err = 0.0_f64;
    let mut k_err = 0.0_f64;
    for j in 0..=last {
        let coarse = (j / ratio).min(sol.x.steps());
        x_err = x_err.max(vector::sup_norm_diff(sol.x.at(coarse), reference.x.at(j)));
        k_err = k_err.max(vector::sup_norm_diff(sol.k.at(coarse), reference.k.at(j)));
    }
    let omega = y.modulus_of_continuity(1.0 / n as f64, t);
    Ok(BoundReport::new(
        x_err + k_err,
        theorem3_constant(q),
        omega,
    ))
}

/// Constants for the input-stability bound: the pushing part contracts to
/// `1/(1-q)`, and reconstruction through `(I - Qᵀ)` expands the combined
/// left side to at most `3/(1-q)` (attained for `Q = 0`).
pub fn theorem4_constants(q: &ReflectionMatrix) -> (f64, f64) {
    let c = q.col_norm();
    (1.0 / (1.0 - c), 3.0 / (1.0 - c))
}

/// Evaluates the stability bound for two same-grid inputs:
/// `sup|k¹-k²| <= D/(1-q)` and `sup|k¹-k²| + sup|x¹-x²| <= 3D/(1-q)` where
/// `D = sup_{s<=t} |y¹_s - y²_s|`.
pub fn check_theorem4(
    q: &ReflectionMatrix,
    y1: &GridPath,
    y2: &GridPath,
    t: f64,
) -> Result<StabilityReport, SchemeError> {
    let sol1 = fast_scheme(q, y1)?;
    let sol2 = fast_scheme(q, y2)?;
    let dist = sup_distance(y1, y2, t)?;
    let k_diff = sup_distance(&sol1.k, &sol2.k, t)?;
    let x_diff = sup_distance(&sol1.x, &sol2.x, t)?;
    let (ck, ctotal) = theorem4_constants(q);
    let k_bound = BoundReport::new(k_diff, ck, dist);
    let combined = BoundReport::new(k_diff + x_diff, ctotal, dist);
    Ok(StabilityReport {
        k_bound,
        combined,
        pass: k_bound.pass && combined.pass,
    })
}

impl SkorokhodSolution {
    /// Runs the solution-side sanity checks against the input it came from.
    pub fn diagnostics(
        &self,
        q: &ReflectionMatrix,
        y: &GridPath,
    ) -> Result<SolutionDiagnostics, SchemeError> {
        let d = y.dim();
        let gap = fixed_point_gap(q, y, &self.k)?;
        let mut recon = 0.0_f64;
        let mut scratch = vec![0.0; d];
        let mut monotone = vector::sup_norm(self.k.at(0)) == 0.0;
        let mut sup_k = 0.0_f64;
        let mut sup_y = 0.0_f64;
        for i in 0..self.x.points() {
            q.qt_mul_into(self.k.at(i), &mut scratch);
            let yi = y.at(i.min(y.steps()));
            for j in 0..d {
                let rebuilt = yi[j] + (self.k.at(i)[j] - scratch[j]);
                recon = recon.max((self.x.at(i)[j] - rebuilt).abs());
            }
            if i > 0 {
                for j in 0..d {
                    if self.k.at(i)[j] < self.k.at(i - 1)[j] {
                        monotone = false;
                    }
                }
            }
            sup_k = sup_k.max(vector::sup_norm(self.k.at(i)));
            sup_y = sup_y.max(vector::sup_norm(yi));
        }
        let slack = 1e-12 * (1.0 + sup_y + sup_k);
        let pushing_bounded = sup_k * (1.0 - q.col_norm()) <= sup_y + slack;
        Ok(SolutionDiagnostics {
            fixed_point_gap: gap,
            reconstruction_gap: recon,
            k_monotone: monotone,
            pushing_bounded,
        })
    }

    /// Writes `t,x1..xd,k1..kd` rows, one per grid point, with lossless
    /// float formatting.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        let d = self.x.dim();
        write!(w, "t")?;
        for j in 1..=d {
            write!(w, ",x{j}")?;
        }
        for j in 1..=d {
            write!(w, ",k{j}")?;
        }
        writeln!(w)?;
        for i in 0..self.x.points() {
            write!(w, "{:.16e}", self.x.time_of(i))?;
            for v in self.x.at(i) {
                write!(w, ",{v:.16e}")?;
            }
            for v in self.k.at(i) {
                write!(w, ",{v:.16e}")?;
            }
            writeln!(w)?;
        }
        Ok(())
    }

    /// Parses the format written by [`write_csv`].
    ///
    /// [`write_csv`]: SkorokhodSolution::write_csv
    pub fn read_csv<R: BufRead>(r: R) -> Result<Self, PathError> {
        let mut lines = Vec::new();
        for line in r.lines() {
            let line = line?;
            if !line.trim().is_empty() {
                lines.push(line);
            }
        }
        if lines.is_empty() {
            return Err(PathError::Malformed {
                line: 1,
                message: "empty solution csv".into(),
            });
        }
        let header: Vec<&str> = lines[0].split(',').collect();
        if header.len() < 3 || header[0] != "t" || (header.len() - 1) % 2 != 0 {
            return Err(PathError::Malformed {
                line: 1,
                message: "expected header t,x1..xd,k1..kd".into(),
            });
        }
        let d = (header.len() - 1) / 2;
        let mut x_csv = String::from("t");
        let mut k_csv = String::from("t");
        for j in 1..=d {
            x_csv.push_str(&format!(",x{j}"));
            k_csv.push_str(&format!(",x{j}"));
        }
        x_csv.push('\n');
        k_csv.push('\n');
        for (ln, line) in lines.iter().enumerate().skip(1) {
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 2 * d + 1 {
                return Err(PathError::Malformed {
                    line: ln + 1,
                    message: format!("expected {} fields, got {}", 2 * d + 1, fields.len()),
                });
            }
            x_csv.push_str(fields[0]);
            k_csv.push_str(fields[0]);
            for f in &fields[1..=d] {
                x_csv.push(',');
                x_csv.push_str(f);
            }
            for f in &fields[d + 1..] {
                k_csv.push(',');
                k_csv.push_str(f);
            }
            x_csv.push('\n');
            k_csv.push('\n');
        }
        Ok(SkorokhodSolution {
            x: GridPath::read_csv(x_csv.as_bytes())?,
            k: GridPath::read_csv(k_csv.as_bytes())?,
        })
    }
}
