#ifndef SUPERADAM_H
#define SUPERADAM_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result code of every C entry point.
 */
typedef enum SaStatus {
  SA_STATUS_OK = 0,
  SA_STATUS_NULL_POINTER = 1,
  /**
   * Malformed JSON, invalid parameters or inconsistent dimensions.
   */
  SA_STATUS_INVALID_ARGUMENT = 2,
  /**
   * The run produced a non-finite value and stopped.
   */
  SA_STATUS_NUMERIC_ABORT = 3,
  SA_STATUS_IO = 4,
  SA_STATUS_OUT_OF_RANGE = 5,
  SA_STATUS_PANIC = 6,
} SaStatus;

/**
 * A problem instance built from a JSON problem spec.
 */
typedef struct SaProblem SaProblem;

/**
 * The result of one optimizer run.
 */
typedef struct SaRun SaRun;

/**
 * One recorded step. Columns that do not apply to the optimizer are NaN.
 */
typedef struct SaRecord {
  uint64_t t;
  double f;
  double grad_norm;
  double est_err;
  double step_norm;
  double mt;
  double gradmap_norm;
  double cond_h;
  double mu;
  double alpha;
  double b1_slack;
} SaRecord;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread, or null. The pointer
 * stays valid until the next call into this library on the same thread.
 */
const char *sa_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *sa_version(void);

/**
 * Builds a problem from a JSON problem spec.
 *
 * # Safety
 * `spec_json` must be a NUL-terminated string; `out` must be writable.
 */
enum SaStatus sa_problem_new(const char *spec_json, struct SaProblem **out);

/**
 * # Safety
 * `problem` must come from [`sa_problem_new`] and not be used afterwards.
 */
void sa_problem_free(struct SaProblem *problem);

/**
 * # Safety
 * `problem` must be a live handle and `out` writable.
 */
enum SaStatus sa_problem_dim(const struct SaProblem *problem, uintptr_t *out);

/**
 * Copies the problem's starting point into `out` (capacity `len`).
 *
 * # Safety
 * `out` must point to `len` writable doubles.
 */
enum SaStatus sa_problem_initial_point(const struct SaProblem *problem, double *out, uintptr_t len);

/**
 * Objective value at `x` (length `len`, equal to the dimension).
 *
 * # Safety
 * `x` must point to `len` readable doubles and `out` be writable.
 */
enum SaStatus sa_problem_value(const struct SaProblem *problem,
                               const double *x,
                               uintptr_t len,
                               double *out);

/**
 * Full gradient at `x`, written to `grad` (both of length `len`).
 *
 * # Safety
 * `x` and `grad` must each point to `len` doubles.
 */
enum SaStatus sa_problem_full_grad(const struct SaProblem *problem,
                                   const double *x,
                                   uintptr_t len,
                                   double *grad);

/**
 * Runs the adaptive-gradient algorithm with a JSON run config.
 *
 * # Safety
 * `problem` must be live, `config_json` NUL-terminated, `out` writable.
 */
enum SaStatus sa_run_superadam(const struct SaProblem *problem,
                               const char *config_json,
                               struct SaRun **out);

/**
 * Runs a reference optimizer with a JSON baseline run config.
 *
 * # Safety
 * As for [`sa_run_superadam`].
 */
enum SaStatus sa_run_baseline(const struct SaProblem *problem,
                              const char *config_json,
                              struct SaRun **out);

/**
 * # Safety
 * `run` must come from a `sa_run_*` call and not be used afterwards.
 */
void sa_run_free(struct SaRun *run);

/**
 * # Safety
 * `run` must be live and `out` writable.
 */
enum SaStatus sa_run_record_count(const struct SaRun *run, uintptr_t *out);

/**
 * # Safety
 * `run` must be live and `out` writable.
 */
enum SaStatus sa_run_record(const struct SaRun *run, uintptr_t index, struct SaRecord *out);

/**
 * The returned point (`x_ζ` or `x_T`), written to `out` (capacity `len`).
 *
 * # Safety
 * `out` must point to `len` writable doubles.
 */
enum SaStatus sa_run_output(const struct SaRun *run, double *out, uintptr_t len);

/**
 * Stochastic-gradient calls made by the estimator and by the matrix generator.
 *
 * # Safety
 * `run` must be live; both outputs writable.
 */
enum SaStatus sa_run_calls(const struct SaRun *run, uint64_t *estimator, uint64_t *matrix);

/**
 * Average of `M_t` over every measured step.
 *
 * # Safety
 * `run` must be live and `out` writable.
 */
enum SaStatus sa_run_average_mt(const struct SaRun *run, double *out);

/**
 * Writes the recorded steps as CSV.
 *
 * # Safety
 * `run` must be live and `path` NUL-terminated.
 */
enum SaStatus sa_run_write_csv(const struct SaRun *run, const char *path);

/**
 * Runs a full experiment config. `out_dir` may be null and `workers` zero
 * to use the environment or config values. A run in which any cell stopped
 * on a non-finite value returns [`SaStatus::NumericAbort`] after writing
 * all outputs.
 *
 * # Safety
 * `config_json` must be NUL-terminated; `out_dir` null or NUL-terminated.
 */
enum SaStatus sa_experiment_run(const char *config_json, const char *out_dir, uintptr_t workers);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SUPERADAM_H */
