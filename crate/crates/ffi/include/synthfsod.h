#ifndef SYNTHFSOD_H
#define SYNTHFSOD_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum SfStatus {
  SF_STATUS_OK = 0,
  SF_STATUS_NULL_POINTER = 1,
  SF_STATUS_INVALID_ARGUMENT = 2,
  SF_STATUS_MALFORMED_HEADER = 3,
  SF_STATUS_TRUNCATED_DATA = 4,
  SF_STATUS_NON_FINITE_VALUE = 5,
  SF_STATUS_ZERO_NORM_ROW = 6,
  SF_STATUS_DIM_MISMATCH = 7,
  SF_STATUS_POOL_TOO_SMALL = 8,
  SF_STATUS_CLUSTERING_FAILED = 9,
  SF_STATUS_EMPTY_MASK = 10,
  SF_STATUS_IO = 11,
  SF_STATUS_BUFFER_TOO_SMALL = 12,
  SF_STATUS_INTERNAL = 13,
  SF_STATUS_PANIC = 14,
} SfStatus;

/**
 * Opaque embedding matrix.
 */
typedef struct SfEmbeddings SfEmbeddings;

/**
 * Axis-aligned box in pixel coordinates, half-open.
 */
typedef struct SfRect {
  double x_min;
  double y_min;
  double x_max;
  double y_max;
} SfRect;

/**
 * Integer box, half-open: `[x_min, x_max) × [y_min, y_max)`.
 */
typedef struct SfBox {
  uint32_t x_min;
  uint32_t y_min;
  uint32_t x_max;
  uint32_t y_max;
} SfBox;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failure on this thread, or NULL. Owned by the
 * library; valid until the next failing call on the same thread.
 */
const char *sf_last_error_message(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *sf_version(void);

/**
 * Load an EMB1 file.
 *
 * # Safety
 * `path` must be a NUL-terminated string; `out` must be writable.
 */
enum SfStatus sf_embeddings_load(const char *path, struct SfEmbeddings **out);

/**
 * Copy `count * dim` row-major floats into a new matrix.
 *
 * # Safety
 * `data` must point to `count * dim` readable floats; `out` must be writable.
 */
enum SfStatus sf_embeddings_from_data(const float *data,
                                      size_t count,
                                      size_t dim,
                                      struct SfEmbeddings **out);

/**
 * Release a matrix. NULL is a no-op.
 *
 * # Safety
 * `m` must be NULL or a handle from this library not yet freed.
 */
void sf_embeddings_free(struct SfEmbeddings *m);

/**
 * Row count, 0 for NULL.
 *
 * # Safety
 * `m` must be NULL or a live handle.
 */
size_t sf_embeddings_count(const struct SfEmbeddings *m);

/**
 * Column count, 0 for NULL.
 *
 * # Safety
 * `m` must be NULL or a live handle.
 */
size_t sf_embeddings_dim(const struct SfEmbeddings *m);

/**
 * Row-major values, borrowed from the handle. NULL for NULL.
 *
 * # Safety
 * `m` must be NULL or a live handle; the pointer dies with it.
 */
const float *sf_embeddings_data(const struct SfEmbeddings *m);

/**
 * New matrix with every row scaled to unit L2 norm.
 *
 * # Safety
 * `m` must be a live handle; `out` must be writable.
 */
enum SfStatus sf_embeddings_normalize(const struct SfEmbeddings *m, struct SfEmbeddings **out);

/**
 * Pick `g` candidate rows with the named strategy (`random`, `syn-max`,
 * `clip-max`, `instance-max`, `clip-uniform`, `instance-uniform`,
 * `kmeans-cluster`, `spectral-cluster`). `real` and `clip_scores` may be
 * NULL when the strategy does not need them. `k == 0` means `k = g`.
 * Writes the chosen row indices to `out_indices` and their number to
 * `out_len`; fails with `BUFFER_TOO_SMALL` (and sets `out_len`) when
 * `capacity < g`.
 *
 * # Safety
 * Handles must be live or NULL as documented; `clip_scores` must hold
 * `n_scores` doubles; `out_indices` must hold `capacity` entries.
 */
enum SfStatus sf_select(const struct SfEmbeddings *generated,
                        const struct SfEmbeddings *real,
                        const double *clip_scores,
                        size_t n_scores,
                        const char *strategy,
                        size_t g,
                        size_t k,
                        uint64_t seed,
                        size_t *out_indices,
                        size_t capacity,
                        size_t *out_len);

/**
 * Softmax over cosine(crop, text_j) / temperature, one probability per
 * text row, written to `out` (which must hold `sf_embeddings_count(texts)`).
 *
 * # Safety
 * `crop` must hold `dim` floats; `out` must hold `capacity` doubles.
 */
enum SfStatus sf_clip_scores(const float *crop,
                             size_t dim,
                             const struct SfEmbeddings *texts,
                             double temperature,
                             double *out,
                             size_t capacity);

/**
 * Intersection over union of two boxes; 0 when the union is empty.
 */
double sf_iou(struct SfRect a, struct SfRect b);

/**
 * Tightest box around pixels with value >= `threshold` in a row-major
 * 8-bit mask. Fails with `EMPTY_MASK` when no pixel qualifies.
 *
 * # Safety
 * `mask` must hold `width * height` bytes; `out` must be writable.
 */
enum SfStatus sf_min_enclosing_box(const uint8_t *mask,
                                   uint32_t width,
                                   uint32_t height,
                                   uint8_t threshold,
                                   struct SfBox *out);

/**
 * Prompts for one category under a scheme (`none`, `a`, `one`, `a5`,
 * `one5`, `real`, `adj`), newline-separated. Free with [`sf_string_free`].
 *
 * # Safety
 * String arguments must be NUL-terminated; `out` must be writable.
 */
enum SfStatus sf_prompts(const char *category, const char *scheme, char **out);

/**
 * Release a string returned by this library. NULL is a no-op.
 *
 * # Safety
 * `s` must be NULL or a string from this library not yet freed.
 */
void sf_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SYNTHFSOD_H */
