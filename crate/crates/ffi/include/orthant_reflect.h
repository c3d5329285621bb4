#ifndef ORTHANT_REFLECT_H
#define ORTHANT_REFLECT_H

/* Generated by cbindgen from orthant-reflect-ffi; do not edit by hand. */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/*
 Solver selector for [`or_solve`].
 */
typedef enum OrSolver {
  /*
   One positive-part correction per grid step.
   */
  OR_SOLVER_FAST = 0,
  /*
   Picard iteration of the grid fixed point (reference oracle).
   */
  OR_SOLVER_FIXED_POINT = 1,
} OrSolver;

/*
 Result codes shared by every fallible entry point.
 */
typedef enum OrStatus {
  /*
   The call succeeded.
   */
  OR_STATUS_OK = 0,
  /*
   A required pointer argument was NULL.
   */
  OR_STATUS_NULL_POINTER = 1,
  /*
   Arguments were structurally invalid (dimensions, norms, grids).
   */
  OR_STATUS_INVALID_ARGUMENT = 2,
  /*
   The underlying solver reported a numerical failure.
   */
  OR_STATUS_SOLVER_FAILURE = 3,
  /*
   A panic was caught at the boundary.
   */
  OR_STATUS_PANIC = 4,
} OrStatus;

/*
 Opaque reflection matrix handle.
 */
typedef struct OrMatrix OrMatrix;

/*
 Opaque grid path handle.
 */
typedef struct OrPath OrPath;

/*
 Opaque solution handle holding the reflected path and its regulator.
 */
typedef struct OrSolution OrSolution;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/*
 Message describing the most recent failure on the calling thread, as a
 NUL terminated string. Empty before the first failure.

 # Safety
 The pointer stays valid until the next failing call on the same thread;
 copy it out before calling anything else.
 */
const char *or_last_error_message(void);

/*
 Builds a `dim x dim` reflection matrix from a row major buffer of
 `dim * dim` entries. Returns NULL and records a message on failure.

 # Safety
 `entries` must point to `dim * dim` readable doubles.
 */
struct OrMatrix *or_matrix_new(uintptr_t dim, const double *entries);

/*
 Parses the text format (dimension line, then rows of entries).

 # Safety
 `text` must be a valid NUL terminated string.
 */
struct OrMatrix *or_matrix_parse(const char *text);

/*
 Releases a matrix handle. NULL is ignored.

 # Safety
 `matrix` must come from this library and not be freed twice.
 */
void or_matrix_free(struct OrMatrix *matrix);

/*
 Dimension of the matrix, or 0 for NULL.

 # Safety
 `matrix` must be a live handle from this library or NULL.
 */
uintptr_t or_matrix_dim(const struct OrMatrix *matrix);

/*
 Maximum row sum, or NaN for NULL.

 # Safety
 `matrix` must be a live handle from this library or NULL.
 */
double or_matrix_row_norm(const struct OrMatrix *matrix);

/*
 Maximum column sum (the contraction rate), or NaN for NULL.

 # Safety
 `matrix` must be a live handle from this library or NULL.
 */
double or_matrix_col_norm(const struct OrMatrix *matrix);

/*
 Projects one point: fills `pi_out` with the projected point and
 `r_bar_out` with the pushing vector, both of length `len`.

 # Safety
 `z` must hold `len` readable doubles; `pi_out` and `r_bar_out` must each
 hold `len` writable doubles; `matrix` must be a live handle.
 */
enum OrStatus or_project(const struct OrMatrix *matrix,
                         const double *z,
                         uintptr_t len,
                         double tol,
                         double *pi_out,
                         double *r_bar_out);

/*
 Builds a grid path with density `n` per unit time over `horizon`, from a
 row major buffer of `len` doubles (`len` must equal points times `dim`).

 # Safety
 `values` must point to `len` readable doubles.
 */
struct OrPath *or_path_new(uint32_t n,
                           double horizon,
                           uintptr_t dim,
                           const double *values,
                           uintptr_t len);

/*
 Samples a coupled Wiener path (density `n_max`, `dim` components).
 */
struct OrPath *or_path_wiener(uint64_t seed, uint32_t n_max, uintptr_t dim, double horizon);

/*
 Releases a path handle. NULL is ignored.

 # Safety
 `path` must come from this library and not be freed twice.
 */
void or_path_free(struct OrPath *path);

/*
 Number of grid points (steps plus one), or 0 for NULL.

 # Safety
 `path` must be a live handle from this library or NULL.
 */
uintptr_t or_path_points(const struct OrPath *path);

/*
 Component count, or 0 for NULL.

 # Safety
 `path` must be a live handle from this library or NULL.
 */
uintptr_t or_path_dim(const struct OrPath *path);

/*
 Time of grid point `i`, or NaN when out of range.

 # Safety
 `path` must be a live handle from this library or NULL.
 */
double or_path_time(const struct OrPath *path, uintptr_t i);

/*
 Borrowed pointer to the row major value buffer (`points * dim` doubles).
 Valid until the handle is freed.

 # Safety
 `path` must be a live handle from this library or NULL.
 */
const double *or_path_values(const struct OrPath *path);

/*
 Solves the Skorokhod problem for `path` and returns an owned solution
 handle, or NULL on failure.

 # Safety
 `matrix` and `path` must be live handles from this library.
 */
struct OrSolution *or_solve(const struct OrMatrix *matrix,
                            const struct OrPath *path,
                            enum OrSolver solver);

/*
 Releases a solution handle. NULL is ignored.

 # Safety
 `solution` must come from this library and not be freed twice.
 */
void or_solution_free(struct OrSolution *solution);

/*
 Copies the reflected path out as a fresh owned handle.

 # Safety
 `solution` must be a live handle from this library.
 */
struct OrPath *or_solution_x(const struct OrSolution *solution);

/*
 Copies the regulator path out as a fresh owned handle.

 # Safety
 `solution` must be a live handle from this library.
 */
struct OrPath *or_solution_k(const struct OrSolution *solution);

/*
 Largest delayed fixed-point defect of a solution against its input,
 written to `gap_out`.

 # Safety
 All three handles must be live; `gap_out` must be writable.
 */
enum OrStatus or_solution_fixed_point_gap(const struct OrMatrix *matrix,
                                          const struct OrPath *path,
                                          const struct OrSolution *solution,
                                          double *gap_out);

#ifdef __cplusplus
} // extern "C"
#endif // __cplusplus

#endif /* ORTHANT_REFLECT_H */
