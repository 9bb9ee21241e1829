#ifndef CGSTAE_H
#define CGSTAE_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum CgstaeStatus {
  CGSTAE_STATUS_OK = 0,
  CGSTAE_STATUS_NULL_POINTER = 1,
  CGSTAE_STATUS_ARGUMENT = 2,
  CGSTAE_STATUS_DIMENSION = 3,
  CGSTAE_STATUS_NUMERIC = 4,
  CGSTAE_STATUS_STATE = 5,
  CGSTAE_STATUS_IO = 6,
  CGSTAE_STATUS_PARSE = 7,
  CGSTAE_STATUS_PANIC = 99,
} CgstaeStatus;

/**
 * Opaque handle to a calibrated monitor model.
 */
typedef struct CgstaeMonitor CgstaeMonitor;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or null. Valid until the
 * next call on the same thread.
 */
const char *cgstae_last_error(void);

/**
 * Loads a monitor model JSON file.
 *
 * # Safety
 * `path` must be a NUL-terminated string; `out` must be writable.
 */
enum CgstaeStatus cgstae_monitor_load(const char *path, struct CgstaeMonitor **out);

/**
 * # Safety
 * `m` must come from [`cgstae_monitor_load`] and not be freed twice.
 */
void cgstae_monitor_free(struct CgstaeMonitor *m);

/**
 * Number of variables and window length expected by the model.
 *
 * # Safety
 * `m` must be a live handle; `n` and `w` must be writable.
 */
enum CgstaeStatus cgstae_monitor_dims(const struct CgstaeMonitor *m, size_t *n, size_t *w);

/**
 * # Safety
 * `m` must be a live handle; outputs must be writable.
 */
enum CgstaeStatus cgstae_monitor_limits(const struct CgstaeMonitor *m,
                                        double *alpha_t2,
                                        double *alpha_spe);

/**
 * T², SPE and the alarm flag for one `w × n` window. With `raw != 0` the
 * stored normalizer is applied first.
 *
 * # Safety
 * `window` must hold `w * n` doubles; outputs must be writable.
 */
enum CgstaeStatus cgstae_monitor_evaluate(const struct CgstaeMonitor *m,
                                          const double *window,
                                          size_t rows,
                                          size_t cols,
                                          int32_t raw,
                                          double *t2,
                                          double *spe,
                                          int32_t *alarm);

/**
 * Upper `1 − significance` quantile of a Gaussian KDE with Silverman
 * bandwidth.
 *
 * # Safety
 * `samples` must hold `len` doubles; `out` must be writable.
 */
enum CgstaeStatus cgstae_kde_limit(const double *samples,
                                   size_t len,
                                   double significance,
                                   double *out);

/**
 * `D^{-1/2}(A + I)D^{-1/2}` for an `n × n` adjacency.
 *
 * # Safety
 * `a` and `out` must each hold `n * n` doubles.
 */
enum CgstaeStatus cgstae_sym_normalize(const double *a, size_t n, double *out);

/**
 * Per-variable squared reconstruction error summed over the window.
 *
 * # Safety
 * `x` and `x_hat` must hold `rows * cols` doubles; `out` holds `cols`.
 */
enum CgstaeStatus cgstae_variable_contribution(const double *x,
                                               const double *x_hat,
                                               size_t rows,
                                               size_t cols,
                                               double *out);

/**
 * Minimal connected subgraph of the δ-truncated graph covering the fault
 * variables. `in_subgraph` and `is_source` receive one 0/1 flag per node.
 * `mode`: 0 auto, 1 exact, 2 greedy.
 *
 * # Safety
 * `a` holds `n * n` doubles, `fault` holds `k` indices, `in_subgraph` and
 * `is_source` hold `n` ints each, `normal_count` is writable.
 */
enum CgstaeStatus cgstae_optimal_subgraph(const double *a,
                                          size_t n,
                                          double delta,
                                          const size_t *fault,
                                          size_t k,
                                          int32_t mode,
                                          int32_t *in_subgraph,
                                          int32_t *is_source,
                                          size_t *normal_count);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CGSTAE_H */
