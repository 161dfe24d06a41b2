#ifndef BLOWUPLAB_H
#define BLOWUPLAB_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Why a simulation stopped.
 */
typedef enum BlowupHalt {
  BLOWUP_HALT_REACHED_T_END = 0,
  BLOWUP_HALT_BLOWUP_DETECTED = 1,
  BLOWUP_HALT_NUMERICAL_FAILURE = 2,
} BlowupHalt;

/**
 * Columns of the per-step time series.
 */
typedef enum BlowupSeriesColumn {
  BLOWUP_SERIES_COLUMN_TIME = 0,
  BLOWUP_SERIES_COLUMN_MAX_U = 1,
  BLOWUP_SERIES_COLUMN_MAX_UT = 2,
  BLOWUP_SERIES_COLUMN_L2_NORM_U = 3,
  BLOWUP_SERIES_COLUMN_L2_NORM_UT = 4,
} BlowupSeriesColumn;

/**
 * Result codes shared by every entry point.
 */
typedef enum BlowupStatus {
  BLOWUP_STATUS_OK = 0,
  BLOWUP_STATUS_NULL_POINTER = 1,
  BLOWUP_STATUS_INVALID_UTF8 = 2,
  BLOWUP_STATUS_INVALID_CONFIG = 3,
  BLOWUP_STATUS_INVALID_ARGUMENT = 4,
  BLOWUP_STATUS_NUMERICAL_FAILURE = 5,
  BLOWUP_STATUS_INSUFFICIENT_DATA = 6,
  BLOWUP_STATUS_IO = 7,
  BLOWUP_STATUS_BUFFER_TOO_SMALL = 8,
  BLOWUP_STATUS_PANIC = 9,
} BlowupStatus;

/**
 * Opaque simulation handle.
 */
typedef struct BlowupSimulation BlowupSimulation;

/**
 * Fitted blow-up time and rate.
 */
typedef struct BlowupEstimate {
  double t_hat;
  double t_hat_uncertainty;
  double beta_hat;
  double kappa_hat;
  size_t fit_samples;
} BlowupEstimate;

/**
 * Rate lower bound: both scaled quantities against `kappa (1 - slack)`.
 * Verdicts are 0 = PASS, 1 = FAIL, 2 = INCONCLUSIVE.
 */
typedef struct BlowupLowerBound {
  double sup_scaled_ut;
  double inf_scaled_f;
  double kappa;
  int ut_verdict;
  int f_verdict;
} BlowupLowerBound;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Copy the last error message of this thread into `buf` (NUL-terminated,
 * truncated to `len`). Returns the full message length without the NUL.
 *
 * # Safety
 * `buf` must be null or point to `len` writable bytes.
 */
size_t blowup_last_error_message(char *buf, size_t len);

/**
 * Library version as a static NUL-terminated string.
 */
const char *blowup_version(void);

/**
 * `beta = 1/(p-1)` and `kappa = beta^beta`.
 *
 * # Safety
 * `beta` and `kappa` must be valid for writes.
 */
enum BlowupStatus blowup_constants(double p, double *beta, double *kappa);

/**
 * Exact ODE blow-up profile `kappa (T - t)^(-beta)`.
 *
 * # Safety
 * `out` must be valid for writes.
 */
enum BlowupStatus blowup_ode_exact_kt(double t, double blowup_time, double p, double *out);

/**
 * Initial-data criterion on a uniform ball grid of `n` nodes (`[-1, 1]` in
 * 1-D, the radius `[0, 1]` otherwise). `satisfied` receives 1 when the
 * value is nonnegative.
 *
 * # Safety
 * The three arrays must hold `n` readable values; `value` and `satisfied`
 * must be valid for writes.
 */
enum BlowupStatus blowup_initial_criterion(double p,
                                           double alpha,
                                           size_t dim,
                                           size_t n,
                                           const double *w0,
                                           const double *grad_w0,
                                           const double *grad_w00,
                                           double *value,
                                           int *satisfied);

/**
 * Parse a TOML run configuration and integrate it. Relative file paths in
 * the configuration resolve against the working directory.
 *
 * # Safety
 * `config_toml` must be a NUL-terminated string; `out` must be valid for
 * writes. The handle written to `out` must be released with
 * [`blowup_simulation_free`].
 */
enum BlowupStatus blowup_simulation_new(const char *config_toml, struct BlowupSimulation **out);

/**
 * Release a handle; null is ignored.
 *
 * # Safety
 * `sim` must be null or a handle from [`blowup_simulation_new`] that has
 * not been freed.
 */
void blowup_simulation_free(struct BlowupSimulation *sim);

/**
 * # Safety
 * `sim` must be a live handle and `out` valid for writes.
 */
enum BlowupStatus blowup_simulation_halt_reason(const struct BlowupSimulation *sim,
                                                enum BlowupHalt *out);

/**
 * Number of rows in the time series and grid points per field.
 *
 * # Safety
 * `sim` must be a live handle; the outputs must be valid for writes.
 */
enum BlowupStatus blowup_simulation_sizes(const struct BlowupSimulation *sim,
                                          size_t *series_len,
                                          size_t *nx);

/**
 * Copy one series column (a [`BlowupSeriesColumn`] value) into `buf`,
 * which must hold at least the series length (see
 * [`blowup_simulation_sizes`]).
 *
 * # Safety
 * `sim` must be a live handle; `buf` must point to `len` writable values.
 */
enum BlowupStatus blowup_simulation_series(const struct BlowupSimulation *sim,
                                           int column,
                                           double *buf,
                                           size_t len);

/**
 * Copy the final `u` and `u_t` (and the grid coordinates, if `x` is not
 * null) into buffers of `len >= nx` values.
 *
 * # Safety
 * `sim` must be a live handle; non-null buffers must hold `len` writable values.
 */
enum BlowupStatus blowup_simulation_final_state(const struct BlowupSimulation *sim,
                                                double *x,
                                                double *u,
                                                double *ut,
                                                size_t len);

/**
 * Blow-up time fit. Returns `InsufficientData` when the run did not blow
 * up or the fit window was too short.
 *
 * # Safety
 * `sim` must be a live handle and `out` valid for writes.
 */
enum BlowupStatus blowup_simulation_estimate(const struct BlowupSimulation *sim,
                                             struct BlowupEstimate *out);

/**
 * Rate lower bound on the fitted window with relative slack `slack`.
 *
 * # Safety
 * `sim` must be a live handle and `out` valid for writes.
 */
enum BlowupStatus blowup_simulation_lower_bound(const struct BlowupSimulation *sim,
                                                double slack,
                                                struct BlowupLowerBound *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* BLOWUPLAB_H */
