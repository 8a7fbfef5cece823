/* Generated by cbindgen. Do not edit. */

#ifndef CTK_H
#define CTK_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum CtkStatus {
  CTK_STATUS_OK = 0,
  CTK_STATUS_NULL_POINTER = 1,
  CTK_STATUS_INVALID_ARGUMENT = 2,
  CTK_STATUS_INVALID_GRID = 3,
  CTK_STATUS_NON_FINITE = 4,
  CTK_STATUS_GRID_MISMATCH = 5,
  CTK_STATUS_ORDER_TOO_HIGH = 6,
  CTK_STATUS_DELAY_OUT_OF_SPAN = 7,
  CTK_STATUS_EMPTY_BASIS = 8,
  CTK_STATUS_DIMENSION_MISMATCH = 9,
  CTK_STATUS_DEGENERATE_COVARIANCE = 10,
  CTK_STATUS_IO = 11,
  CTK_STATUS_FORMAT = 12,
  CTK_STATUS_PANIC = 99,
} CtkStatus;

typedef enum CtkFamilyKind {
  CTK_FAMILY_KIND_DAMPED_EXP = 0,
  CTK_FAMILY_KIND_POWER_EXP = 1,
  CTK_FAMILY_KIND_CONSTANT = 2,
} CtkFamilyKind;

typedef enum CtkDerivativeKind {
  CTK_DERIVATIVE_KIND_FINITE_DIFFERENCE = 0,
  CTK_DERIVATIVE_KIND_SPECTRAL = 1,
} CtkDerivativeKind;

typedef enum CtkSign {
  CTK_SIGN_PLUS = 0,
  CTK_SIGN_MINUS = 1,
} CtkSign;

typedef struct CtkDesignMatrix CtkDesignMatrix;

typedef struct CtkProjection CtkProjection;

typedef struct CtkSignal CtkSignal;

typedef struct CtkGrid {
  double t0;
  double dt;
  size_t len;
} CtkGrid;

/**
 * `param` is `tau` for damped exponentials, the degree `d` for power
 * exponentials and the value for constants.
 */
typedef struct CtkFamily {
  enum CtkFamilyKind kind;
  double param;
} CtkFamily;

/**
 * `accuracy` (2, 4, 6 or 8) applies to finite differences only.
 */
typedef struct CtkDerivativeMethod {
  enum CtkDerivativeKind kind;
  uint32_t accuracy;
} CtkDerivativeMethod;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or NULL. Valid until the
 * next failing call on the same thread.
 */
const char *ctk_last_error_message(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *ctk_version(void);

/**
 * # Safety
 * `s` must come from this library and not have been freed.
 */
void ctk_string_free(char *s);

/**
 * Creates a signal from `len` samples. `im` may be NULL for a real signal.
 *
 * # Safety
 * `re` (and `im` when non-NULL) must point to `len` readable doubles; `out`
 * must be writable.
 */
enum CtkStatus ctk_signal_new(double t0,
                              double dt,
                              const double *re,
                              const double *im,
                              size_t len,
                              struct CtkSignal **out);

/**
 * # Safety
 * `s` must be NULL or a handle from this library that has not been freed.
 */
void ctk_signal_free(struct CtkSignal *s);

/**
 * Number of samples, or 0 for NULL.
 *
 * # Safety
 * `s` must be NULL or a live signal handle.
 */
size_t ctk_signal_len(const struct CtkSignal *s);

/**
 * # Safety
 * `s` must be a live signal handle; `out` must be writable.
 */
enum CtkStatus ctk_signal_grid(const struct CtkSignal *s, struct CtkGrid *out);

/**
 * Copies samples into caller buffers of length `len` (must equal the
 * signal length). `im` may be NULL.
 *
 * # Safety
 * `re` (and `im` when non-NULL) must point to `len` writable doubles.
 */
enum CtkStatus ctk_signal_samples(const struct CtkSignal *s, double *re, double *im, size_t len);

/**
 * # Safety
 * `path` must be a NUL-terminated string; `out` must be writable.
 */
enum CtkStatus ctk_signal_read_csv(const char *path_, struct CtkSignal **out);

/**
 * # Safety
 * `s` must be a live signal handle; `path` a NUL-terminated string.
 */
enum CtkStatus ctk_signal_write_csv(const struct CtkSignal *s, const char *path_);

/**
 * Samples `f^n` on the grid.
 *
 * # Safety
 * `out` must be writable.
 */
enum CtkStatus ctk_eval_family(struct CtkFamily fam,
                               uint32_t n,
                               struct CtkGrid g,
                               struct CtkSignal **out);

/**
 * # Safety
 * `s` must be a live signal handle; `out` must be writable.
 */
enum CtkStatus ctk_differentiate(const struct CtkSignal *s,
                                 size_t order,
                                 struct CtkDerivativeMethod m,
                                 struct CtkSignal **out);

/**
 * Applies `Ψ_k^±`.
 *
 * # Safety
 * `s` must be a live signal handle; `out` must be writable.
 */
enum CtkStatus ctk_apply_psi(const struct CtkSignal *s,
                             size_t k,
                             enum CtkSign sign,
                             struct CtkDerivativeMethod m,
                             struct CtkSignal **out);

/**
 * Trapezoidal energy of `|s|²`.
 *
 * # Safety
 * `s` must be a live signal handle; `out` must be writable.
 */
enum CtkStatus ctk_energy(const struct CtkSignal *s, double *out);

/**
 * # Safety
 * `l0` and `saturated` must be writable.
 */
enum CtkStatus ctk_detect_l0(struct CtkFamily fam,
                             uint32_t n,
                             struct CtkGrid g,
                             double epsilon_rel,
                             size_t *l0,
                             bool *saturated);

/**
 * Builds the basis `∂^k f^n(t - τ)` for `k <= k_max`, each `n` in `n_set`
 * and each delay.
 *
 * # Safety
 * `n_set` must point to `n_len` values, `delays` to `delay_len` values;
 * `out` must be writable.
 */
enum CtkStatus ctk_build_basis(struct CtkFamily fam,
                               size_t k_max,
                               const uint32_t *n_set,
                               size_t n_len,
                               const double *delays,
                               size_t delay_len,
                               struct CtkGrid g,
                               struct CtkDesignMatrix **out);

/**
 * # Safety
 * `a` must be NULL or a live design-matrix handle.
 */
void ctk_design_matrix_free(struct CtkDesignMatrix *a);

/**
 * Column count, or 0 for NULL.
 *
 * # Safety
 * `a` must be NULL or a live design-matrix handle.
 */
size_t ctk_design_matrix_columns(const struct CtkDesignMatrix *a);

/**
 * Least-squares fit of `r` on the basis.
 *
 * # Safety
 * `r` and `a` must be live handles; `out` must be writable.
 */
enum CtkStatus ctk_solve_projection(const struct CtkSignal *r,
                                    const struct CtkDesignMatrix *a,
                                    double rank_tol,
                                    struct CtkProjection **out);

/**
 * # Safety
 * `p` must be NULL or a live projection handle.
 */
void ctk_projection_free(struct CtkProjection *p);

/**
 * # Safety
 * `p` must be a live projection handle; outputs must be writable.
 */
enum CtkStatus ctk_projection_summary(const struct CtkProjection *p,
                                      double *residual,
                                      size_t *rank);

/**
 * Coefficient of column `(k, n, tau)`. A column that is absent or was
 * dropped yields `InvalidArgument`.
 *
 * # Safety
 * `p` must be a live projection handle; outputs must be writable.
 */
enum CtkStatus ctk_projection_beta(const struct CtkProjection *p,
                                   size_t k,
                                   uint32_t n,
                                   double tau,
                                   double *re,
                                   double *im);

/**
 * Projection result as JSON; free with [`ctk_string_free`].
 *
 * # Safety
 * `p` must be a live projection handle; `out` must be writable.
 */
enum CtkStatus ctk_projection_to_json(const struct CtkProjection *p, char **out);

/**
 * Per-subchannel SNR under `σ² I` as a JSON report; free with
 * [`ctk_string_free`].
 *
 * # Safety
 * `n_set` must point to `n_len` values; `out` must be writable.
 */
enum CtkStatus ctk_snr_subchannel_json(struct CtkFamily fam,
                                       const uint32_t *n_set,
                                       size_t n_len,
                                       struct CtkGrid g,
                                       double sigma2,
                                       char **out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CTK_H */
