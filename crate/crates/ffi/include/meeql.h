#ifndef MEEQL_H
#define MEEQL_H

/* Generated by cbindgen. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum MeeqlStatus {
  MEEQL_STATUS_OK = 0,
  MEEQL_STATUS_NULL_POINTER = 1,
  MEEQL_STATUS_INVALID_ARGUMENT = 2,
  MEEQL_STATUS_BUFFER_TOO_SMALL = 3,
  MEEQL_STATUS_DIVERGENCE = 4,
  MEEQL_STATUS_PARSE = 5,
  MEEQL_STATUS_IO = 6,
  MEEQL_STATUS_COMPUTATION = 7,
  MEEQL_STATUS_PANIC = 8,
} MeeqlStatus;

typedef enum MeeqlModelKind {
  MEEQL_MODEL_KIND_OAT = 0,
  MEEQL_MODEL_KIND_ES = 1,
  MEEQL_MODEL_KIND_MEANFIELD = 2,
} MeeqlModelKind;

/**
 * Opaque parameterized model.
 */
typedef struct MeeqlModel MeeqlModel;

/**
 * Lattice simulation settings. Fill with [`meeql_abm_params_default`].
 */
typedef struct MeeqlAbmParams {
  double rp;
  double rm;
  size_t lattice_side;
  double ic_fraction;
  double t_end;
  size_t n_points;
  uint64_t seed;
} MeeqlAbmParams;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Copies the last error message of this thread into `buf` (NUL-terminated,
 * truncated to `cap - 1` bytes) and returns the full message length. With
 * a null `buf` only the length is returned.
 *
 * # Safety
 * `buf` must be null or point to `cap` writable bytes.
 */
size_t meeql_last_error_message(char *buf, size_t cap);

/**
 * The fixed mean-field model `dC/dt = (rp/2) C - rp C^2`.
 *
 * # Safety
 * `out` must be a valid pointer to write the handle to.
 */
enum MeeqlStatus meeql_model_meanfield(struct MeeqlModel **out);

/**
 * Parses a model from the JSON written by `meeql learn`.
 *
 * # Safety
 * `json` must be a NUL-terminated string; `out` must be writable.
 */
enum MeeqlStatus meeql_model_from_json(const char *json, struct MeeqlModel **out);

/**
 * Reads a model JSON file.
 *
 * # Safety
 * `path` must be a NUL-terminated string; `out` must be writable.
 */
enum MeeqlStatus meeql_model_read(const char *path, struct MeeqlModel **out);

/**
 * Releases a model. Null is ignored.
 *
 * # Safety
 * `model` must be null or a handle from a `meeql_model_*` constructor that
 * has not been freed.
 */
void meeql_model_free(struct MeeqlModel *model);

/**
 * # Safety
 * `model` must be a live handle; `out` must be writable.
 */
enum MeeqlStatus meeql_model_kind(const struct MeeqlModel *model, enum MeeqlModelKind *out);

/**
 * Writes the dense coefficients at `rp` (entry `k-1` multiplies `C^k`)
 * and their count to `len`. If `cap` is smaller than the count nothing is
 * copied and `MEEQL_STATUS_BUFFER_TOO_SMALL` is returned; `coeffs` may then
 * be null.
 *
 * # Safety
 * `model` must be a live handle, `coeffs` null or `cap` writable doubles,
 * and `len` writable.
 */
enum MeeqlStatus meeql_model_coefficients(const struct MeeqlModel *model,
                                          double rp,
                                          double *coeffs,
                                          size_t cap,
                                          size_t *len);

/**
 * Solves the model at `rp` from `c0` and writes the solution at the `n`
 * times in `times` (increasing, uniformly spaced) to `out`.
 *
 * # Safety
 * `times` must hold `n` doubles and `out` must have room for `n`.
 */
enum MeeqlStatus meeql_model_predict(const struct MeeqlModel *model,
                                     double rp,
                                     double c0,
                                     const double *times,
                                     size_t n,
                                     double *out);

/**
 * Estimates rp from one trajectory by minimising the model's SSE over
 * `[lo, hi]`. The first sample is the initial condition.
 *
 * # Safety
 * `times` and `values` must hold `n` doubles; `rp_hat` must be writable and
 * `sse` null or writable.
 */
enum MeeqlStatus meeql_infer_rp(const struct MeeqlModel *model,
                                const double *times,
                                const double *values,
                                size_t n,
                                double lo,
                                double hi,
                                double *rp_hat,
                                double *sse);

/**
 * Defaults for a given rp: unit migration rate, a 120x120 lattice, horizon
 * `30/rp` and 100 samples.
 *
 * # Safety
 * `out` must be writable.
 */
enum MeeqlStatus meeql_abm_params_default(double rp,
                                          double ic_fraction,
                                          uint64_t seed,
                                          struct MeeqlAbmParams *out);

/**
 * Runs replicate `replicate` of the lattice model and writes the occupied
 * fraction at `params.n_points` uniform times to `out`.
 *
 * # Safety
 * `params` must be readable and `out` must have room for `n_points` doubles.
 */
enum MeeqlStatus meeql_abm_simulate(const struct MeeqlAbmParams *params,
                                    size_t replicate,
                                    double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* MEEQL_H */
