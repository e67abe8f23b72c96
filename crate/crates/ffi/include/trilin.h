#ifndef TRILIN_H
#define TRILIN_H

/* Generated by cbindgen from crates/ffi/src. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum TrilinMembershipTag {
  TRILIN_MEMBERSHIP_TAG_NEAR_POINT = 0,
  TRILIN_MEMBERSHIP_TAG_WITNESS = 1,
  TRILIN_MEMBERSHIP_TAG_ITERATION_CAP_REACHED = 2,
} TrilinMembershipTag;

typedef enum TrilinOutcome {
  TRILIN_OUTCOME_EPS_SOLUTION = 0,
  TRILIN_OUTCOME_NORMAL_EQ_EPS_SOLUTION = 1,
  TRILIN_OUTCOME_UNSOLVABLE = 2,
  TRILIN_OUTCOME_INCONCLUSIVE = 3,
} TrilinOutcome;

typedef enum TrilinPivotMode {
  TRILIN_PIVOT_MODE_STANDARD = 0,
  TRILIN_PIVOT_MODE_STRICT = 1,
} TrilinPivotMode;

typedef enum TrilinPreconditioner {
  TRILIN_PRECONDITIONER_NONE = 0,
  TRILIN_PRECONDITIONER_JACOBI = 1,
} TrilinPreconditioner;

typedef enum TrilinStatus {
  TRILIN_STATUS_OK = 0,
  TRILIN_STATUS_NULL_POINTER = 1,
  TRILIN_STATUS_INVALID_ARGUMENT = 2,
  TRILIN_STATUS_DIMENSION_MISMATCH = 3,
  TRILIN_STATUS_NON_FINITE = 4,
  /**
   * Radius cap or iteration budget reached without a verdict.
   */
  TRILIN_STATUS_INCONCLUSIVE = 5,
  TRILIN_STATUS_NUMERICAL = 6,
  TRILIN_STATUS_IO = 7,
  TRILIN_STATUS_PARSE = 8,
  TRILIN_STATUS_PANIC = 9,
} TrilinStatus;

/**
 * Dense matrix handle.
 */
typedef struct TrilinMatrix TrilinMatrix;

typedef struct TrilinSolverConfig {
  double epsilon;
  /**
   * NaN: `|b| / |A|`.
   */
  double r0;
  /**
   * NaN: `|b|^2 / epsilon`.
   */
  double radius_cap;
  enum TrilinPivotMode pivot_mode;
  uint64_t max_iters_total;
  /**
   * NaN: `epsilon`.
   */
  double normal_eq_tol;
  /**
   * NaN: `epsilon`; 0 disables the unsolvable verdict.
   */
  double unsolvable_tol;
  /**
   * NaN: unknown.
   */
  double sigma_star_hint;
} TrilinSolverConfig;

typedef struct TrilinMembershipConfig {
  double radius;
  double epsilon;
  enum TrilinPivotMode pivot_mode;
  /**
   * 0: derived from the radius, `|A|` and epsilon.
   */
  uint64_t max_iters;
} TrilinMembershipConfig;

typedef struct TrilinSolveReport {
  enum TrilinOutcome outcome;
  double residual;
  double normal_residual;
  /**
   * NaN unless `outcome` is unsolvable.
   */
  double delta_lower_bound;
  uint64_t iterations;
  double final_radius;
  /**
   * Number of radii tried, including the initial one; 0 when inconclusive.
   */
  size_t radius_count;
} TrilinSolveReport;

typedef struct TrilinMembershipReport {
  enum TrilinMembershipTag tag;
  double gap;
  uint64_t iterations;
  /**
   * Witness only (NaN otherwise): `distance_lower <= dist(b, ellipsoid) <= distance_upper`.
   */
  double distance_lower;
  double distance_upper;
  /**
   * Witness only: any radius whose ellipsoid contains `b` is at least this.
   */
  double radius_lower_bound;
} TrilinMembershipReport;

typedef struct TrilinBaselineReport {
  bool converged;
  bool breakdown;
  double residual;
  double normal_residual;
  uint64_t iterations;
} TrilinBaselineReport;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a NUL-terminated string with static lifetime.
 */
const char *trilin_version(void);

/**
 * Message for the most recent failed call on this thread, or NULL.
 *
 * The pointer stays valid until the next trilin call on this thread.
 */
const char *trilin_last_error_message(void);

/**
 * Copies a row-major `rows x cols` array into a new matrix handle.
 *
 * # Safety
 * `data` must point to `rows * cols` readable doubles and `out` must be a
 * valid pointer to a handle slot.
 */
enum TrilinStatus trilin_matrix_new(size_t rows,
                                    size_t cols,
                                    const double *data,
                                    struct TrilinMatrix **out);

/**
 * Reads a Matrix Market file (array or coordinate, real).
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out` a valid handle slot.
 */
enum TrilinStatus trilin_matrix_read(const char *path, struct TrilinMatrix **out);

/**
 * Releases a handle. NULL is ignored.
 *
 * # Safety
 * `m` must come from this library and not be used afterwards.
 */
void trilin_matrix_free(struct TrilinMatrix *m);

/**
 * Row count, or 0 for NULL.
 *
 * # Safety
 * `m` must be NULL or a live handle.
 */
size_t trilin_matrix_rows(const struct TrilinMatrix *m);

/**
 * Column count, or 0 for NULL.
 *
 * # Safety
 * `m` must be NULL or a live handle.
 */
size_t trilin_matrix_cols(const struct TrilinMatrix *m);

struct TrilinSolverConfig trilin_solver_config_default(double epsilon);

struct TrilinMembershipConfig trilin_membership_config_default(double radius, double epsilon);

/**
 * Solves `Ax = b`.
 *
 * `x_out` (length `x_len == cols`) receives the iterate and may be NULL.
 * When the radius cap or iteration budget is hit the call returns
 * `TRILIN_STATUS_INCONCLUSIVE` and still fills `x_out` and `report` with the
 * last iterate.
 *
 * # Safety
 * Pointers must be valid for the stated lengths; `a` must be a live handle.
 */
enum TrilinStatus trilin_solve(const struct TrilinMatrix *a,
                               const double *b,
                               size_t b_len,
                               const struct TrilinSolverConfig *config,
                               double *x_out,
                               size_t x_len,
                               struct TrilinSolveReport *report);

/**
 * Tests whether `b` lies within `epsilon` of `{Ax : |x| <= radius}`.
 *
 * # Safety
 * Pointers must be valid for the stated lengths; `a` must be a live handle.
 */
enum TrilinStatus trilin_membership(const struct TrilinMatrix *a,
                                    const double *b,
                                    size_t b_len,
                                    const struct TrilinMembershipConfig *config,
                                    double *x_out,
                                    size_t x_len,
                                    struct TrilinMembershipReport *report);

/**
 * Unrestarted BiCGSTAB on a square system; converged means
 * `|Ax - b| <= tol |b|`.
 *
 * # Safety
 * Pointers must be valid for the stated lengths; `a` must be a live handle.
 */
enum TrilinStatus trilin_bicgstab(const struct TrilinMatrix *a,
                                  const double *b,
                                  size_t b_len,
                                  double tol,
                                  uint64_t max_iters,
                                  enum TrilinPreconditioner precond,
                                  double *x_out,
                                  size_t x_len,
                                  struct TrilinBaselineReport *report);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* TRILIN_H */
