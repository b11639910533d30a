#ifndef QMCNET_H
#define QMCNET_H

/* Generated by cbindgen from src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum QmcSampler {
  QMC_SAMPLER_SOBOL = 0,
  QMC_SAMPLER_HALTON = 1,
  /**
   * Base-2 van der Corput; one dimension only.
   */
  QMC_SAMPLER_VDC = 2,
  QMC_SAMPLER_RANDOM = 3,
} QmcSampler;

typedef enum QmcStatus {
  QMC_STATUS_OK = 0,
  QMC_STATUS_NULL_POINTER = 1,
  QMC_STATUS_INVALID_ARGUMENT = 2,
  QMC_STATUS_UNSUPPORTED_DIMENSION = 3,
  QMC_STATUS_UNKNOWN_BENCHMARK = 4,
  QMC_STATUS_TOO_LARGE = 5,
  QMC_STATUS_IO = 6,
  QMC_STATUS_MODEL_FORMAT = 7,
  QMC_STATUS_BUFFER_TOO_SMALL = 8,
  QMC_STATUS_PANIC = 9,
  QMC_STATUS_OTHER = 10,
} QmcStatus;

/**
 * Opaque trained network.
 */
typedef struct QmcModel QmcModel;

/**
 * Opaque point set.
 */
typedef struct QmcPointSet QmcPointSet;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Copies the last error message of this thread into `buf` (NUL-terminated, truncated
 * to `len`). Returns the full message length in bytes, excluding the terminator.
 *
 * # Safety
 * `buf` must be null or point to `len` writable bytes.
 */
size_t qmc_last_error(char *buf, size_t len);

/**
 * Generates `n` points of `sampler` in `dim` dimensions, starting at sequence index
 * `start` (1 skips the origin). `seed` only affects the random sampler.
 *
 * # Safety
 * `out` must be a valid pointer to writable handle storage.
 */
enum QmcStatus qmc_pointset_generate(enum QmcSampler sampler,
                                     size_t dim,
                                     size_t n,
                                     uint64_t start,
                                     uint64_t seed,
                                     struct QmcPointSet **out);

/**
 * Wraps `n * dim` row-major coordinates in `[0, 1]` as a point set.
 *
 * # Safety
 * `coords` must point to `n * dim` readable doubles; `out` must be writable.
 */
enum QmcStatus qmc_pointset_from_coords(const double *coords,
                                        size_t n,
                                        size_t dim,
                                        struct QmcPointSet **out);

/**
 * # Safety
 * `ps` must be null or a handle from this library that has not been freed.
 */
void qmc_pointset_free(struct QmcPointSet *ps);

/**
 * Number of points; 0 for a null handle.
 *
 * # Safety
 * `ps` must be null or a live handle.
 */
size_t qmc_pointset_len(const struct QmcPointSet *ps);

/**
 * Dimension; 0 for a null handle.
 *
 * # Safety
 * `ps` must be null or a live handle.
 */
size_t qmc_pointset_dim(const struct QmcPointSet *ps);

/**
 * Row-major coordinates, valid until the handle is freed. Null for a null handle.
 *
 * # Safety
 * `ps` must be null or a live handle.
 */
const double *qmc_pointset_coords(const struct QmcPointSet *ps);

/**
 * Exact star discrepancy (dimension at most 3).
 *
 * # Safety
 * `ps` must be a live handle and `out` writable.
 */
enum QmcStatus qmc_star_discrepancy(const struct QmcPointSet *ps, double *out);

/**
 * Input dimension of a named benchmark map.
 *
 * # Safety
 * `name` must be a NUL-terminated string and `out` writable.
 */
enum QmcStatus qmc_benchmark_dim(const char *name, size_t *out);

/**
 * Evaluates a benchmark map at every point of `ps`, writing `len(ps)` values.
 *
 * # Safety
 * `name` must be a NUL-terminated string, `ps` a live handle and `out` must have room
 * for `out_len` doubles.
 */
enum QmcStatus qmc_benchmark_evaluate(const char *name,
                                      const struct QmcPointSet *ps,
                                      double *out,
                                      size_t out_len);

/**
 * Loads a model file written by the `train` command.
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out` writable.
 */
enum QmcStatus qmc_model_load(const char *path, struct QmcModel **out);

/**
 * # Safety
 * `model` must be null or a handle from this library that has not been freed.
 */
void qmc_model_free(struct QmcModel *model);

/**
 * Input dimension of the network; 0 for a null handle.
 *
 * # Safety
 * `model` must be null or a live handle.
 */
size_t qmc_model_input_dim(const struct QmcModel *model);

/**
 * Inference-mode predictions at every point of `ps`.
 *
 * # Safety
 * `model` and `ps` must be live handles; `out` must have room for `out_len` doubles.
 */
enum QmcStatus qmc_model_predict(const struct QmcModel *model,
                                 const struct QmcPointSet *ps,
                                 double *out,
                                 size_t out_len);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* QMCNET_H */
