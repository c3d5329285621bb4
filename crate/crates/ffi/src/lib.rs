//! C ABI over the solver: opaque handles for matrices, grid paths, and
//! solutions, plus flat-buffer entry points for single projections.
//!
//! Conventions
//! - Constructors return an owned pointer or NULL; every owned pointer has
//!   exactly one matching `or_*_free`.
//! - Functions that can fail return [`OrStatus`]; on any failure the thread
//!   local message behind [`or_last_error_message`] is updated.
//! - Buffers are row major `f64`, one row per grid point.
//! - Panics never cross the boundary; they surface as `OR_STATUS_PANIC`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::fmt::Display;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use orthant_reflect::matrix::ReflectionMatrix;
use orthant_reflect::paths::GridPath;
use orthant_reflect::projection;
use orthant_reflect::sde::{generate_wiener, WienerConfig};
use orthant_reflect::skorokhod::{fast_scheme, fixed_point_oracle, SkorokhodSolution, ORACLE_TOL};

/// Result codes shared by every fallible entry point.
#[repr(C)]
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum OrStatus {
    /// The call succeeded.
    Ok = 0,
    /// A required pointer argument was NULL.
    NullPointer = 1,
    /// Arguments were structurally invalid (dimensions, norms, grids).
    InvalidArgument = 2,
    /// The underlying solver reported a numerical failure.
    SolverFailure = 3,
    /// A panic was caught at the boundary.
    Panic = 4,
}

/// Solver selector for [`or_solve`].
#[repr(C)]
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum OrSolver {
    /// One positive-part correction per grid step.
    Fast = 0,
    /// Picard iteration of the grid fixed point (reference oracle).
    FixedPoint = 1,
}

/// Opaque reflection matrix handle.
pub struct OrMatrix {
    inner: ReflectionMatrix,
}

/// Opaque grid path handle.
pub struct OrPath {
    inner: GridPath,
}

/// Opaque solution handle holding the reflected path and its regulator.
pub struct OrSolution {
    inner: SkorokhodSolution,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(message: impl Display) {
    let text = message.to_string().replace('\0', " ");
    LAST_ERROR.with(|slot| {
        *slot.borrow_mut() = CString::new(text).unwrap_or_default();
    });
}

fn fail(status: OrStatus, message: impl Display) -> OrStatus {
    set_error(message);
    status
}

fn guard_ptr<T, F: FnOnce() -> *mut T>(f: F) -> *mut T {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(p) => p,
        Err(_) => {
            set_error("internal panic");
            ptr::null_mut()
        }
    }
}

fn guard_status<F: FnOnce() -> OrStatus>(f: F) -> OrStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => s,
        Err(_) => {
            set_error("internal panic");
            OrStatus::Panic
        }
    }
}

/// Message describing the most recent failure on the calling thread, as a
/// NUL terminated string. Empty before the first failure.
///
/// # Safety
/// The pointer stays valid until the next failing call on the same thread;
/// copy it out before calling anything else.
#[no_mangle]
pub unsafe extern "C" fn or_last_error_message() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ptr())
}

/// Builds a `dim x dim` reflection matrix from a row major buffer of
/// `dim * dim` entries. Returns NULL and records a message on failure.
///
/// # Safety
/// `entries` must point to `dim * dim` readable doubles.
#[no_mangle]
pub unsafe extern "C" fn or_matrix_new(dim: usize, entries: *const f64) -> *mut OrMatrix {
    guard_ptr(|| {
        if entries.is_null() && dim > 0 {
            set_error("entries pointer is NULL");
            return ptr::null_mut();
        }
        let slice = std::slice::from_raw_parts(entries, dim * dim);
        match ReflectionMatrix::new(dim, slice.to_vec()) {
            Ok(inner) => Box::into_raw(Box::new(OrMatrix { inner })),
            Err(e) => {
                set_error(e);
                ptr::null_mut()
            }
        }
    })
}

/// Parses the text format (dimension line, then rows of entries).
///
/// # Safety
/// `text` must be a valid NUL terminated string.
#[no_mangle]
pub unsafe extern "C" fn or_matrix_parse(text: *const c_char) -> *mut OrMatrix {
    guard_ptr(|| {
        if text.is_null() {
            set_error("text pointer is NULL");
            return ptr::null_mut();
        }
        let raw = match CStr::from_ptr(text).to_str() {
            Ok(s) => s,
            Err(e) => {
                set_error(e);
                return ptr::null_mut();
            }
        };
        match ReflectionMatrix::parse_text(raw) {
            Ok(inner) => Box::into_raw(Box::new(OrMatrix { inner })),
            Err(e) => {
                set_error(e);
                ptr::null_mut()
            }
        }
    })
}

/// Releases a matrix handle. NULL is ignored.
///
/// # Safety
/// `matrix` must come from this library and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn or_matrix_free(matrix: *mut OrMatrix) {
    if !matrix.is_null() {
        drop(Box::from_raw(matrix));
    }
}

/// Dimension of the matrix, or 0 for NULL.
///
/// # Safety
/// `matrix` must be a live handle from this library or NULL.
#[no_mangle]
pub unsafe extern "C" fn or_matrix_dim(matrix: *const OrMatrix) -> usize {
    if matrix.is_null() {
        return 0;
    }
    (*matrix).inner.dim()
}

/// Maximum row sum, or NaN for NULL.
///
/// # Safety
/// `matrix` must be a live handle from this library or NULL.
#[no_mangle]
pub unsafe extern "C" fn or_matrix_row_norm(matrix: *const OrMatrix) -> f64 {
    if matrix.is_null() {
        return f64::NAN;
    }
    (*matrix).inner.row_norm()
}

/// Maximum column sum (the contraction rate), or NaN for NULL.
///
/// # Safety
/// `matrix` must be a live handle from this library or NULL.
#[no_mangle]
pub unsafe extern "C" fn or_matrix_col_norm(matrix: *const OrMatrix) -> f64 {
    if matrix.is_null() {
        return f64::NAN;
    }
    (*matrix).inner.col_norm()
}

/// Projects one point: fills `pi_out` with the projected point and
/// `r_bar_out` with the pushing vector, both of length `len`.
///
/// # Safety
/// `z` must hold `len` readable doubles; `pi_out` and `r_bar_out` must each
/// hold `len` writable doubles; `matrix` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn or_project(
    matrix: *const OrMatrix,
    z: *const f64,
    len: usize,
    tol: f64,
    pi_out: *mut f64,
    r_bar_out: *mut f64,
) -> OrStatus {
    guard_status(|| {
        if matrix.is_null() || z.is_null() || pi_out.is_null() || r_bar_out.is_null() {
            return fail(OrStatus::NullPointer, "NULL argument to or_project");
        }
        let q = &(*matrix).inner;
        if len != q.dim() {
            return fail(
                OrStatus::InvalidArgument,
                format!("point length {len} does not match dimension {}", q.dim()),
            );
        }
        let tol = if tol > 0.0 { tol } else { projection::DEFAULT_TOL };
        let point = std::slice::from_raw_parts(z, len);
        let max_iter = projection::default_max_iter(q, point, tol);
        match projection::project_fixed_point(q, point, tol, max_iter) {
            Ok(result) => {
                std::slice::from_raw_parts_mut(pi_out, len).copy_from_slice(&result.pi);
                std::slice::from_raw_parts_mut(r_bar_out, len).copy_from_slice(&result.r_bar);
                OrStatus::Ok
            }
            Err(e) => fail(OrStatus::SolverFailure, e),
        }
    })
}

/// Builds a grid path with density `n` per unit time over `horizon`, from a
/// row major buffer of `len` doubles (`len` must equal points times `dim`).
///
/// # Safety
/// `values` must point to `len` readable doubles.
#[no_mangle]
pub unsafe extern "C" fn or_path_new(
    n: u32,
    horizon: f64,
    dim: usize,
    values: *const f64,
    len: usize,
) -> *mut OrPath {
    guard_ptr(|| {
        if values.is_null() && len > 0 {
            set_error("values pointer is NULL");
            return ptr::null_mut();
        }
        let slice = std::slice::from_raw_parts(values, len);
        match GridPath::from_values(n, horizon, dim, slice.to_vec()) {
            Ok(inner) => Box::into_raw(Box::new(OrPath { inner })),
            Err(e) => {
                set_error(e);
                ptr::null_mut()
            }
        }
    })
}

/// Samples a coupled Wiener path (density `n_max`, `dim` components).
#[no_mangle]
pub extern "C" fn or_path_wiener(seed: u64, n_max: u32, dim: usize, horizon: f64) -> *mut OrPath {
    guard_ptr(|| {
        let cfg = WienerConfig {
            seed,
            n_max,
            d: dim,
            horizon,
        };
        match generate_wiener(&cfg) {
            Ok(inner) => Box::into_raw(Box::new(OrPath { inner })),
            Err(e) => {
                set_error(e);
                ptr::null_mut()
            }
        }
    })
}

/// Releases a path handle. NULL is ignored.
///
/// # Safety
/// `path` must come from this library and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn or_path_free(path: *mut OrPath) {
    if !path.is_null() {
        drop(Box::from_raw(path));
    }
}

/// Number of grid points (steps plus one), or 0 for NULL.
///
/// # Safety
/// `path` must be a live handle from this library or NULL.
#[no_mangle]
pub unsafe extern "C" fn or_path_points(path: *const OrPath) -> usize {
    if path.is_null() {
        return 0;
    }
    (*path).inner.points()
}

/// Component count, or 0 for NULL.
///
/// # Safety
/// `path` must be a live handle from this library or NULL.
#[no_mangle]
pub unsafe extern "C" fn or_path_dim(path: *const OrPath) -> usize {
    if path.is_null() {
        return 0;
    }
    (*path).inner.dim()
}

/// Time of grid point `i`, or NaN when out of range.
///
/// # Safety
/// `path` must be a live handle from this library or NULL.
#[no_mangle]
pub unsafe extern "C" fn or_path_time(path: *const OrPath, i: usize) -> f64 {
    if path.is_null() || i >= (*path).inner.points() {
        return f64::NAN;
    }
    (*path).inner.time_of(i)
}

/// Borrowed pointer to the row major value buffer (`points * dim` doubles).
/// Valid until the handle is freed.
///
/// # Safety
/// `path` must be a live handle from this library or NULL.
#[no_mangle]
pub unsafe extern "C" fn or_path_values(path: *const OrPath) -> *const f64 {
    if path.is_null() || (*path).inner.points() == 0 {
        return ptr::null();
    }
    (*path).inner.at(0).as_ptr()
}

/// Solves the Skorokhod problem for `path` and returns an owned solution
/// handle, or NULL on failure.
///
/// # Safety
/// `matrix` and `path` must be live handles from this library.
#[no_mangle]
pub unsafe extern "C" fn or_solve(
    matrix: *const OrMatrix,
    path: *const OrPath,
    solver: OrSolver,
) -> *mut OrSolution {
    guard_ptr(|| {
        if matrix.is_null() || path.is_null() {
            set_error("NULL argument to or_solve");
            return ptr::null_mut();
        }
        let q = &(*matrix).inner;
        let y = &(*path).inner;
        let solved = match solver {
            OrSolver::Fast => fast_scheme(q, y),
            OrSolver::FixedPoint => fixed_point_oracle(q, y, ORACLE_TOL),
        };
        match solved {
            Ok(inner) => Box::into_raw(Box::new(OrSolution { inner })),
            Err(e) => {
                set_error(e);
                ptr::null_mut()
            }
        }
    })
}

/// Releases a solution handle. NULL is ignored.
///
/// # Safety
/// `solution` must come from this library and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn or_solution_free(solution: *mut OrSolution) {
    if !solution.is_null() {
        drop(Box::from_raw(solution));
    }
}

/// Copies the reflected path out as a fresh owned handle.
///
/// # Safety
/// `solution` must be a live handle from this library.
#[no_mangle]
pub unsafe extern "C" fn or_solution_x(solution: *const OrSolution) -> *mut OrPath {
    guard_ptr(|| {
        if solution.is_null() {
            set_error("solution pointer is NULL");
            return ptr::null_mut();
        }
        Box::into_raw(Box::new(OrPath {
            inner: (*solution).inner.x.clone(),
        }))
    })
}

/// Copies the regulator path out as a fresh owned handle.
///
/// # Safety
/// `solution` must be a live handle from this library.
#[no_mangle]
pub unsafe extern "C" fn or_solution_k(solution: *const OrSolution) -> *mut OrPath {
    guard_ptr(|| {
        if solution.is_null() {
            set_error("solution pointer is NULL");
            return ptr::null_mut();
        }
        Box::into_raw(Box::new(OrPath {
            inner: (*solution).inner.k.clone(),
        }))
    })
}

/// Largest delayed fixed-point defect of a solution against its input,
/// written to `gap_out`.
///
/// # Safety
/// All three handles must be live; `gap_out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn or_solution_fixed_point_gap(
    matrix: *const OrMatrix,
    path: *const OrPath,
    solution: *const OrSolution,
    gap_out: *mut f64,
) -> OrStatus {
    guard_status(|| {
        if matrix.is_null() || path.is_null() || solution.is_null() || gap_out.is_null() {
            return fail(
                OrStatus::NullPointer,
                "NULL argument to or_solution_fixed_point_gap",
            );
        }
        match orthant_reflect::skorokhod::fixed_point_gap(
            &(*matrix).inner,
            &(*path).inner,
            &(*solution).inner.k,
        ) {
            Ok(gap) => {
                *gap_out = gap;
                OrStatus::Ok
            }
            Err(e) => fail(OrStatus::InvalidArgument, e),
        }
    })
}
