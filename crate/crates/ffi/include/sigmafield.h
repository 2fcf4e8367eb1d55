#ifndef SIGMAFIELD_H
#define SIGMAFIELD_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result codes.
 */
typedef enum SfStatus {
  SF_STATUS_OK = 0,
  SF_STATUS_NULL_POINTER = 1,
  SF_STATUS_INVALID_INPUT = 2,
  SF_STATUS_CONFIG = 3,
  SF_STATUS_NUMERICAL = 4,
  SF_STATUS_BUFFER_TOO_SMALL = 5,
  SF_STATUS_PANIC = 6,
} SfStatus;

/**
 * A measure on the real line.
 */
typedef struct SfMeasure SfMeasure;

/**
 * A seeded field simulator.
 */
typedef struct SfSimulator SfSimulator;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *sf_version(void);

/**
 * Copies the calling thread's last error message into `buf` (NUL
 * terminated, truncated to `len`). Returns the full message length
 * without the terminator.
 *
 * # Safety
 * `buf` must be null or point to `len` writable bytes.
 */
size_t sf_last_error_message(char *buf, size_t len);

/**
 * Builtin measure by name, e.g. `"lebesgue"`, `"normalized-lebesgue"`,
 * `"power:0.5"`, `"cauchy-like:1"`, `"dirac"`.
 *
 * # Safety
 * `name` must be a NUL-terminated string; `out` must be writable.
 */
enum SfStatus sf_measure_builtin(const char *name, struct SfMeasure **out);

/**
 * Measure from a JSON document
 * `{"density": ..., "atoms": [[x, mass], ...], "quadrature": {...}}`.
 *
 * # Safety
 * `json` must be a NUL-terminated string; `out` must be writable.
 */
enum SfStatus sf_measure_from_json(const char *json, struct SfMeasure **out);

/**
 * # Safety
 * `m` must be null or a handle from this library not yet freed.
 */
void sf_measure_free(struct SfMeasure *m);

/**
 * `sigma(A)` for the set given by `n_intervals` pairs.
 *
 * # Safety
 * `m` must be a live handle, `intervals` must hold `2 * n_intervals`
 * doubles and `out` must be writable.
 */
enum SfStatus sf_measure_of(const struct SfMeasure *m,
                            const double *intervals,
                            size_t n_intervals,
                            double *out);

/**
 * Variance function `r(t)` of the stationary-increment process whose
 * spectral measure is `m`.
 *
 * # Safety
 * `m` must be a live handle and `out` writable.
 */
enum SfStatus sf_variance_r(const struct SfMeasure *m, double t, double *out);

/**
 * `exp(-(sigma(A) + sigma(B) - 2 sigma(A ∩ B)) / 2)`.
 *
 * # Safety
 * `m` must be a live handle, `a` and `b` must hold `2 * na` and `2 * nb`
 * doubles and `out` must be writable.
 */
enum SfStatus sf_rkhs_kernel(const struct SfMeasure *m,
                             const double *a,
                             size_t na,
                             const double *b,
                             size_t nb,
                             double *out);

/**
 * Probabilists' Hermite polynomial `He_n(x)`.
 *
 * # Safety
 * `out` must be writable.
 */
enum SfStatus sf_hermite_eval(uint32_t n, double x, double *out);

/**
 * Simulator over the domain `[lo, hi)` with a Haar basis of the given
 * depth. The measure is copied, so `m` may be freed afterwards.
 *
 * # Safety
 * `m` must be a live handle and `out` writable.
 */
enum SfStatus sf_simulator_new(const struct SfMeasure *m,
                               double lo,
                               double hi,
                               uint32_t depth,
                               uint64_t seed,
                               size_t replicas,
                               struct SfSimulator **out);

/**
 * # Safety
 * `s` must be null or a handle from this library not yet freed.
 */
void sf_simulator_free(struct SfSimulator *s);

/**
 * Number of replicas of a simulator, 0 for a null handle.
 *
 * # Safety
 * `s` must be null or a live handle.
 */
size_t sf_simulator_replicas(const struct SfSimulator *s);

/**
 * Writes `W_A` for every replica into `values`. `len` must be at least
 * the replica count.
 *
 * # Safety
 * `s` must be a live handle, `intervals` must hold `2 * n_intervals`
 * doubles and `values` must have `len` writable doubles.
 */
enum SfStatus sf_simulator_sample_set(const struct SfSimulator *s,
                                      const double *intervals,
                                      size_t n_intervals,
                                      double *values,
                                      size_t len);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SIGMAFIELD_H */
