#ifndef L2DENS_H
#define L2DENS_H

#pragma once

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status codes returned by every fallible function.
 */
typedef enum L2densStatus {
  L2DENS_STATUS_OK = 0,
  L2DENS_STATUS_NULL_POINTER = 1,
  L2DENS_STATUS_INVALID_ARGUMENT = 2,
  L2DENS_STATUS_ODD_SAMPLE_SIZE = 3,
  L2DENS_STATUS_UNSUPPORTED_SAMPLE_SIZE = 4,
  L2DENS_STATUS_INVALID_INPUT = 5,
  L2DENS_STATUS_NUMERICAL = 6,
  L2DENS_STATUS_BUFFER_TOO_SMALL = 7,
  L2DENS_STATUS_INTERNAL = 8,
} L2densStatus;

/**
 * Which estimate the isotropic combiner kept.
 */
typedef enum L2densBranch {
  /**
   * No combiner was requested.
   */
  L2DENS_BRANCH_NONE = 0,
  L2DENS_BRANCH_PARAMETRIC = 1,
  L2DENS_BRANCH_ADAPTIVE = 2,
} L2densBranch;

/**
 * Result of one estimation run.
 */
typedef struct L2densEstimate L2densEstimate;

/**
 * Kernel of a given order and dimension.
 */
typedef struct L2densKernel L2densKernel;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *l2dens_version(void);

/**
 * Copies the last error message of this thread into `buf` (NUL-terminated,
 * truncated to `len`). Returns the full message length, or 0 if there is none.
 *
 * # Safety
 * `buf` must be null or point to `len` writable bytes.
 */
uintptr_t l2dens_last_error(char *buf, uintptr_t len);

/**
 * Builds the kernel of order `b` (2..=8) in dimension `d`.
 *
 * # Safety
 * `out` must be null or a valid pointer to writable storage for a handle.
 */
enum L2densStatus l2dens_kernel_new(uint32_t b, uintptr_t d, struct L2densKernel **out);

/**
 * Releases a kernel; null is ignored.
 *
 * # Safety
 * `kernel` must come from [`l2dens_kernel_new`] and not be used afterwards.
 */
void l2dens_kernel_free(struct L2densKernel *kernel);

/**
 * `||T||_1`, `||T||_inf` and `varpi` of a kernel; any output may be null.
 *
 * # Safety
 * `kernel` must be a live handle; outputs must be null or writable.
 */
enum L2densStatus l2dens_kernel_norms(const struct L2densKernel *kernel,
                                      double *l1,
                                      double *sup,
                                      double *varpi);

/**
 * Estimates the L2 norm from `rows` observations of dimension `d` stored
 * row-major in `data`. `rows` must be even; the first half is X, the second Y.
 *
 * # Safety
 * `kernel` must be a live handle, `data` must point to `rows * d` doubles
 * and `out` must be writable.
 */
enum L2densStatus l2dens_estimate(const struct L2densKernel *kernel,
                                  const double *data,
                                  uintptr_t rows,
                                  uintptr_t d,
                                  double q,
                                  bool isotropic,
                                  struct L2densEstimate **out);

/**
 * Reported estimate of `||f||_2` (combined when requested).
 *
 * # Safety
 * `est` must be a live handle or null (which yields NaN).
 */
double l2dens_estimate_value(const struct L2densEstimate *est);

/**
 * Estimate at the selected bandwidth, before combining.
 *
 * # Safety
 * As [`l2dens_estimate_value`].
 */
double l2dens_estimate_selected(const struct L2densEstimate *est);

/**
 * The U-statistic at the selected bandwidth (an estimate of `||f||_2^2`).
 *
 * # Safety
 * As [`l2dens_estimate_value`].
 */
double l2dens_estimate_n_hat(const struct L2densEstimate *est);

/**
 * Branch kept by the combiner.
 *
 * # Safety
 * As [`l2dens_estimate_value`].
 */
enum L2densBranch l2dens_estimate_branch(const struct L2densEstimate *est);

/**
 * Copies the selected bandwidth (`d` values) and its grid exponents into
 * the caller's buffers; either buffer may be null.
 *
 * # Safety
 * `est` must be a live handle; non-null buffers must hold `len` elements.
 */
enum L2densStatus l2dens_estimate_bandwidth(const struct L2densEstimate *est,
                                            double *h,
                                            uint32_t *exponents,
                                            uintptr_t len);

/**
 * Releases an estimate; null is ignored.
 *
 * # Safety
 * `est` must come from [`l2dens_estimate`] and not be used afterwards.
 */
void l2dens_estimate_free(struct L2densEstimate *est);

/**
 * Minimax exponent for per-axis smoothness `beta[j]` and integrability
 * `r[j]` (pass `INFINITY` for an infinite index).
 *
 * # Safety
 * `beta` and `r` must point to `d` doubles; `out` must be writable.
 */
enum L2densStatus l2dens_rate_exponent(const double *beta,
                                       const double *r,
                                       uintptr_t d,
                                       double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* L2DENS_H */
