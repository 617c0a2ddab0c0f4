#ifndef NSDVPR_H
#define NSDVPR_H

/* Generated by cbindgen; regenerate with `cargo build -p nsdvpr-ffi --features gen-header`. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result code of every fallible call.
 */
typedef enum {
  NSD_STATUS_OK = 0,
  NSD_STATUS_NULL_POINTER = 1,
  NSD_STATUS_INVALID_ARGUMENT = 2,
  NSD_STATUS_IO = 3,
  NSD_STATUS_FORMAT = 4,
  NSD_STATUS_NON_FINITE = 5,
  NSD_STATUS_DIMENSION_MISMATCH = 6,
  NSD_STATUS_EMPTY = 7,
  NSD_STATUS_PANIC = 8,
} NsdStatus;

/**
 * Opaque query-by-reference cosine distance matrix.
 */
typedef struct NsdCostMatrix NsdCostMatrix;

/**
 * Opaque set of equal-length `f32` descriptors.
 */
typedef struct NsdDescriptorSet NsdDescriptorSet;

typedef struct {
  /**
   * Frames accumulated behind each query.
   */
  size_t seq_len;
  /**
   * Odd number of trajectory slopes.
   */
  size_t slope_count;
  /**
   * Half-width of the slope fan in radians, in `[0, pi/4)`.
   */
  double angle_halfwidth;
  /**
   * Uniqueness exclusion window in frames.
   */
  size_t uniqueness_window;
} NsdSearchParams;

/**
 * One query's match. `best_reference` is -1 and the costs are NaN when no
 * trajectory fits; `uniqueness` is NaN when no competitor exists.
 */
typedef struct {
  size_t query_index;
  int64_t best_reference;
  double seq_cost;
  double uniqueness;
} NsdMatch;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failing call on this thread, or null. The pointer
 * stays valid until the next failing call on the same thread.
 */
const char *nsd_last_error_message(void);

/**
 * Copies `count * dim` row-major values into a new set.
 */
NsdStatus nsd_set_new(const float *values, size_t count, size_t dim, NsdDescriptorSet **out);

/**
 * Reads a descriptor file; composite files are returned as whole rows.
 */
NsdStatus nsd_set_read(const char *path, NsdDescriptorSet **out);

NsdStatus nsd_set_write(const NsdDescriptorSet *set, const char *path);

/**
 * Number of rows; 0 for a null handle.
 */
size_t nsd_set_count(const NsdDescriptorSet *set);

/**
 * Descriptor length; 0 for a null handle.
 */
size_t nsd_set_dim(const NsdDescriptorSet *set);

/**
 * Copies row `index` into `out`, which must hold `dim` values.
 */
NsdStatus nsd_set_copy_row(const NsdDescriptorSet *set, size_t index, float *out, size_t out_len);

void nsd_set_free(NsdDescriptorSet *set);

/**
 * Per-dimension standardization against the set's own statistics.
 */
NsdStatus nsd_normalize_batch(const NsdDescriptorSet *set, NsdDescriptorSet **out);

NsdStatus nsd_cost_matrix_build(const NsdDescriptorSet *query,
                                const NsdDescriptorSet *reference,
                                NsdCostMatrix **out);

size_t nsd_cost_matrix_rows(const NsdCostMatrix *matrix);

size_t nsd_cost_matrix_cols(const NsdCostMatrix *matrix);

NsdStatus nsd_cost_matrix_get(const NsdCostMatrix *matrix, size_t row, size_t col, float *out);

void nsd_cost_matrix_free(NsdCostMatrix *matrix);

NsdSearchParams nsd_search_params_default(void);

/**
 * Sequence search for every query row. `out` must hold at least
 * `nsd_cost_matrix_rows(matrix)` entries.
 */
NsdStatus nsd_match_all(const NsdCostMatrix *matrix,
                        const NsdSearchParams *params,
                        NsdMatch *out,
                        size_t out_len);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* NSDVPR_H */
