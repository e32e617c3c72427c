#ifndef LOWMACH_H
#define LOWMACH_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status codes.
 */
typedef enum LmStatus {
  LM_STATUS_OK = 0,
  LM_STATUS_NULL_POINTER = 1,
  LM_STATUS_INVALID_UTF8 = 2,
  LM_STATUS_INVALID_PARAMETER = 3,
  LM_STATUS_CONFIG = 4,
  LM_STATUS_NUMERICAL = 5,
  LM_STATUS_IO = 6,
  LM_STATUS_INSUFFICIENT_DATA = 7,
  LM_STATUS_OUT_OF_RANGE = 8,
  LM_STATUS_PANIC = 99,
} LmStatus;

/**
 * Parsed and validated configuration.
 */
typedef struct LmConfig LmConfig;

/**
 * Completed sweep.
 */
typedef struct LmSweep LmSweep;

/**
 * One row of a sweep. Numeric fields are NaN when `completed` is 0.
 */
typedef struct LmSweepRecord {
  double epsilon;
  int completed;
  double sup_etilde;
  double final_l1_rho;
  double final_l2_v;
  double final_h1_c;
  double energy_violation;
  size_t steps;
} LmSweepRecord;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread, or null. Valid until the
 * next `lm_*` call on the same thread.
 */
const char *lm_last_error_message(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *lm_version(void);

/**
 * Loads a configuration file.
 *
 * # Safety
 * `path` must be a NUL-terminated string; `out` must be writable.
 */
enum LmStatus lm_config_load(const char *path, struct LmConfig **out);

/**
 * Parses configuration text.
 *
 * # Safety
 * `text` must be a NUL-terminated string; `out` must be writable.
 */
enum LmStatus lm_config_from_str(const char *text, struct LmConfig **out);

/**
 * # Safety
 * `cfg` must be null or a handle from `lm_config_*` not yet freed.
 */
void lm_config_free(struct LmConfig *cfg);

/**
 * Runs the full sweep on `threads` workers (0 = all cores).
 *
 * # Safety
 * `cfg` must be a live config handle; `out` must be writable.
 */
enum LmStatus lm_sweep_run(const struct LmConfig *cfg, size_t threads, struct LmSweep **out);

/**
 * # Safety
 * `sweep` must be null or a handle from `lm_sweep_run` not yet freed.
 */
void lm_sweep_free(struct LmSweep *sweep);

/**
 * Number of records (one per epsilon); 0 for a null handle.
 *
 * # Safety
 * `sweep` must be null or a live sweep handle.
 */
size_t lm_sweep_len(const struct LmSweep *sweep);

/**
 * # Safety
 * `sweep` must be a live sweep handle; `out` must be writable.
 */
enum LmStatus lm_sweep_record(const struct LmSweep *sweep, size_t index, struct LmSweepRecord *out);

/**
 * # Safety
 * `sweep` must be a live sweep handle; `out` must be writable.
 */
enum LmStatus lm_sweep_fitted_order(const struct LmSweep *sweep, double *out);

/**
 * Writes all sweep artifacts into `dir` (created if missing).
 *
 * # Safety
 * `sweep` must be a live sweep handle; `dir` a NUL-terminated string.
 */
enum LmStatus lm_sweep_write(const struct LmSweep *sweep,
                             const char *dir,
                             int emit_fields,
                             int emit_plots);

/**
 * Least-squares slope of `log(values)` against `log(eps)`.
 *
 * # Safety
 * `eps` and `values` must point to `n` readable doubles; `out` writable.
 */
enum LmStatus lm_fit_convergence_order(const double *eps,
                                       const double *values,
                                       size_t n,
                                       double *out);

/**
 * Samples the structural assumptions for `p = a rho^gamma` and the
 * truncated double well on `rho in [0, 10]`, `c in [-5, 5]`. Writes the
 * number of failed checks to `failures`.
 *
 * # Safety
 * `failures` must be writable.
 */
enum LmStatus lm_verify_assumptions(double gamma,
                                    double a,
                                    double kappa,
                                    double c_t,
                                    size_t samples,
                                    size_t *failures);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* LOWMACH_H */
