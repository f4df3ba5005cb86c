#ifndef SQRTREG_H
#define SQRTREG_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Status codes. Zero means success.
typedef enum SqrtregStatus {
  SQRTREG_STATUS_OK = 0,
  SQRTREG_STATUS_NULL_POINTER = 1,
  SQRTREG_STATUS_INVALID_ARGUMENT = 2,
  SQRTREG_STATUS_DIMENSION_MISMATCH = 3,
  SQRTREG_STATUS_INTERPOLATION = 4,
  SQRTREG_STATUS_NOT_CONVERGED = 5,
  SQRTREG_STATUS_NUMERICAL = 6,
  SQRTREG_STATUS_IO = 7,
  SQRTREG_STATUS_PANIC = 8,
} SqrtregStatus;

// Result of a fit.
typedef struct SqrtregFit SqrtregFit;

// Validated norm bound to a dimension.
typedef struct SqrtregNorm SqrtregNorm;

// Design matrix and response.
typedef struct SqrtregProblem SqrtregProblem;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Last error message on this thread, or null if the last call succeeded.
// The pointer stays valid until the next call into this library on the same thread.
const char *sqrtreg_last_error_message(void);

// Builds a problem from a row-major `n x p` design and a length-`n` response.
//
// # Safety
// `x` must point to `n * p` doubles, `y` to `n` doubles, `out` to writable storage.
enum SqrtregStatus sqrtreg_problem_new(const double *x,
                                       const double *y,
                                       size_t n,
                                       size_t p,
                                       struct SqrtregProblem **out);

// # Safety
// `problem` must come from [`sqrtreg_problem_new`] or be null.
void sqrtreg_problem_free(struct SqrtregProblem *problem);

// Builds a norm on `R^p` from its JSON description, e.g. `{"kind":"l1"}`.
//
// # Safety
// `json` must be a NUL-terminated string, `out` writable.
enum SqrtregStatus sqrtreg_norm_from_json(const char *json, size_t p, struct SqrtregNorm **out);

// # Safety
// `norm` must come from [`sqrtreg_norm_from_json`] or be null.
void sqrtreg_norm_free(struct SqrtregNorm *norm);

// Norm value of a length-`len` vector.
//
// # Safety
// `b` must point to `len` doubles and `out` must be writable.
enum SqrtregStatus sqrtreg_norm_value(const struct SqrtregNorm *norm,
                                      const double *b,
                                      size_t len,
                                      double *out);

// Dual norm value of a length-`len` vector.
//
// # Safety
// As for [`sqrtreg_norm_value`].
enum SqrtregStatus sqrtreg_norm_dual(const struct SqrtregNorm *norm,
                                     const double *z,
                                     size_t len,
                                     double *out);

// Fits the estimator at `lambda` with default solver settings.
// A fit that fails the KKT check returns `NotConverged` and no handle.
//
// # Safety
// Handles must be valid, `out` writable.
enum SqrtregStatus sqrtreg_fit(const struct SqrtregProblem *problem,
                               const struct SqrtregNorm *norm,
                               double lambda,
                               struct SqrtregFit **out);

// # Safety
// `fit` must come from [`sqrtreg_fit`] or be null.
void sqrtreg_fit_free(struct SqrtregFit *fit);

// Number of coefficients in a fit.
//
// # Safety
// `fit` must be a valid handle or null (returns 0).
size_t sqrtreg_fit_len(const struct SqrtregFit *fit);

// Copies the coefficients into `buf`, which must hold `len` doubles.
//
// # Safety
// `buf` must point to `len` writable doubles.
enum SqrtregStatus sqrtreg_fit_coefficients(const struct SqrtregFit *fit, double *buf, size_t len);

// Residual norm `||Y - X beta_hat||_n`, or NaN for a null handle.
//
// # Safety
// `fit` must be a valid handle or null.
double sqrtreg_fit_residual_norm(const struct SqrtregFit *fit);

// KKT residual of the fit, or NaN for a null handle.
//
// # Safety
// `fit` must be a valid handle or null.
double sqrtreg_fit_kkt_residual(const struct SqrtregFit *fit);

// KKT residual of an arbitrary coefficient vector.
//
// # Safety
// `beta` must point to `len` doubles, handles valid, `out` writable.
enum SqrtregStatus sqrtreg_check_kkt(const struct SqrtregProblem *problem,
                                     const struct SqrtregNorm *norm,
                                     const double *beta,
                                     size_t len,
                                     double lambda,
                                     double *out);

// Theoretical penalty level for `norm` at sample size `n` and confidence `1 - alpha`.
//
// # Safety
// `norm` must be valid and `out` writable.
enum SqrtregStatus sqrtreg_theoretical_lambda(const struct SqrtregNorm *norm,
                                              size_t n,
                                              double alpha,
                                              double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SQRTREG_H */
