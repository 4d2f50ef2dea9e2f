#ifndef LCENGINE_H
#define LCENGINE_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum LceStatus {
  LCE_STATUS_OK = 0,
  LCE_STATUS_NULL_ARGUMENT = 1,
  LCE_STATUS_INVALID_UTF8 = 2,
  LCE_STATUS_IO = 3,
  LCE_STATUS_PARSE = 4,
  LCE_STATUS_INVALID_MODEL = 5,
  LCE_STATUS_INVALID_ARGUMENT = 6,
  LCE_STATUS_NUMERICAL = 7,
  LCE_STATUS_OUT_OF_RANGE = 8,
  LCE_STATUS_BUFFER_TOO_SMALL = 9,
  LCE_STATUS_PANIC = 99,
} LceStatus;

typedef enum LceFormat {
  LCE_FORMAT_CSV = 0,
  LCE_FORMAT_JSON = 1,
} LceFormat;

/**
 * A loaded model with its background database and optional characterization tables.
 */
typedef struct LceModel LceModel;

/**
 * Result of a run.
 */
typedef struct LceResult LceResult;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Loads a model and background database; `dcf_path` may be NULL.
 *
 * # Safety
 * Path arguments must be NUL-terminated strings or NULL. `out` must be writable.
 */
enum LceStatus lce_model_load(const char *model_path,
                              const char *db_path,
                              const char *dcf_path,
                              struct LceModel **out);

/**
 * # Safety
 * `model` must come from [`lce_model_load`] and not be used afterwards. NULL is ignored.
 */
void lce_model_free(struct LceModel *model);

/**
 * `Ok` when the model resolves against its database; otherwise `InvalidModel` with the
 * report as the error message. Warnings alone do not fail.
 *
 * # Safety
 * `model` must be a live handle.
 */
enum LceStatus lce_validate(const struct LceModel *model);

/**
 * Static calculation; models that vary over the grid use the grid calculator.
 *
 * # Safety
 * `model` must be a live handle and `out` writable.
 */
enum LceStatus lce_run_static(const struct LceModel *model, struct LceResult **out);

/**
 * Full scenario by time calculation.
 *
 * # Safety
 * `model` must be a live handle and `out` writable.
 */
enum LceStatus lce_run_matrix(const struct LceModel *model, struct LceResult **out);

/**
 * Monte Carlo with one result row per run.
 *
 * # Safety
 * `model` must be a live handle and `out` writable.
 */
enum LceStatus lce_run_monte_carlo(const struct LceModel *model,
                                   size_t n_runs,
                                   uint64_t seed,
                                   struct LceResult **out);

/**
 * Dynamic characterization with the tables given at load time.
 *
 * # Safety
 * `model` must be a live handle and `out` writable.
 */
enum LceStatus lce_run_dynamic(const struct LceModel *model, struct LceResult **out);

/**
 * # Safety
 * `result` must come from an `lce_run_*` function and not be used afterwards. NULL is ignored.
 */
void lce_result_free(struct LceResult *result);

/**
 * Scenario rows and time-step columns of the unit results (runs for Monte Carlo).
 *
 * # Safety
 * `result` must be a live handle; `rows` and `cols` writable.
 */
enum LceStatus lce_result_shape(const struct LceResult *result, size_t *rows, size_t *cols);

/**
 * # Safety
 * `result` must be a live handle; `count` writable.
 */
enum LceStatus lce_result_category_count(const struct LceResult *result, size_t *count);

/**
 * Name of category `index`, valid while the result lives. NULL when out of range.
 *
 * # Safety
 * `result` must be a live handle.
 */
const char *lce_result_category_name(const struct LceResult *result, size_t index);

/**
 * Copies the unit impact of category `index`, row-major, into `buf` of `len` values.
 *
 * # Safety
 * `result` must be a live handle and `buf` valid for `len` writes.
 */
enum LceStatus lce_result_impact(const struct LceResult *result,
                                 size_t index,
                                 double *buf,
                                 size_t len);

/**
 * Copies the unit cost, row-major, into `buf` of `len` values.
 *
 * # Safety
 * `result` must be a live handle and `buf` valid for `len` writes.
 */
enum LceStatus lce_result_cost(const struct LceResult *result, double *buf, size_t len);

/**
 * Output periods of a dynamic result.
 *
 * # Safety
 * `result` must be a live handle; `steps` writable.
 */
enum LceStatus lce_result_dynamic_steps(const struct LceResult *result, size_t *steps);

/**
 * Copies the dynamic impact of category `index` (rows x dynamic steps) into `buf`.
 *
 * # Safety
 * `result` must be a live handle and `buf` valid for `len` writes.
 */
enum LceStatus lce_result_dynamic_impact(const struct LceResult *result,
                                         size_t index,
                                         double *buf,
                                         size_t len);

/**
 * Writes the result to `path`.
 *
 * # Safety
 * `result` must be a live handle and `path` a NUL-terminated string.
 */
enum LceStatus lce_result_export(const struct LceResult *result,
                                 const char *path,
                                 enum LceFormat format);

/**
 * Net present value of `n` cash flows at `rate` per period.
 *
 * # Safety
 * `values` must be valid for `n` reads and `out` writable.
 */
enum LceStatus lce_npv(const double *values, size_t n, double rate, double *out);

/**
 * Minimum selling price for `n` periods of costs and production.
 *
 * # Safety
 * `costs` and `production` must be valid for `n` reads and `out` writable.
 */
enum LceStatus lce_msp(const double *costs,
                       const double *production,
                       size_t n,
                       double rate,
                       double *out);

/**
 * Levelized cost of energy for `n` periods of costs and delivered energy.
 *
 * # Safety
 * `costs` and `energy` must be valid for `n` reads and `out` writable.
 */
enum LceStatus lce_lcoe(const double *costs,
                        const double *energy,
                        size_t n,
                        double rate,
                        double *out);

/**
 * Message of the last failed call on this thread; empty after a success. Valid until the
 * next call on this thread.
 */
const char *lce_last_error_message(void);

const char *lce_version(void);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* LCENGINE_H */
