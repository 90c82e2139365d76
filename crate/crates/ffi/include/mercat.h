#ifndef MERCAT_H
#define MERCAT_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stddef.h>
#include <stdint.h>

/*
 Result code of every call. The nonzero codes group errors the same way
 the command-line tool's exit codes do.
 */
typedef enum MercatStatus {
  MERCAT_STATUS_OK = 0,
  /*
   A required pointer argument was null.
   */
  MERCAT_STATUS_NULL_POINTER = 1,
  /*
   Invalid configuration or dimensions.
   */
  MERCAT_STATUS_INVALID_CONFIG = 2,
  /*
   Invalid or degenerate input data.
   */
  MERCAT_STATUS_INVALID_INPUT = 3,
  /*
   A numerical failure during computation.
   */
  MERCAT_STATUS_NUMERICAL = 4,
  /*
   A panic was caught at the boundary; the library state is unaffected
   but the call produced nothing.
   */
  MERCAT_STATUS_PANIC = 5,
} MercatStatus;

/*
 Opaque row-major data matrix.
 */
typedef struct MercatData MercatData;

/*
 Opaque sphere embedding together with the loss trace that produced it
 (empty for embeddings built from coordinates).
 */
typedef struct MercatEmbedding MercatEmbedding;

/*
 Training options. Obtain defaults from [`mercat_train_options_default`]
 and change fields as needed.
 */
typedef struct MercatTrainOptions {
  /*
   Denoising rank; 0 selects the rule given by `rank_threshold`.
   */
  size_t rank;
  /*
   When `rank` is 0: nonzero picks the rank by hard singular-value
   thresholding, zero uses `min(50, n, d)`.
   */
  uint8_t rank_threshold;
  size_t iterations;
  double learning_rate;
  /*
   Iterations at which the step size is multiplied by `schedule_factor`;
   may be null when `milestone_count` is 0.
   */
  const size_t *milestones;
  size_t milestone_count;
  double schedule_factor;
  size_t batch_size;
  size_t subsample;
  uint64_t seed;
  /*
   Nonzero compares angles instead of their cosines.
   */
  uint8_t angle_loss;
  /*
   Nonzero updates every point's moment estimates each step.
   */
  uint8_t dense_moments;
  /*
   Nonzero makes one iteration a single batch step instead of a full
   pass over the anchors.
   */
  uint8_t batch_iterations;
} MercatTrainOptions;

/*
 Quality-metric options; see [`mercat_metrics_options_default`].
 */
typedef struct MercatMetricsOptions {
  size_t k_nn;
  size_t density_nn;
  size_t angle_subsample;
  uint64_t seed;
  /*
   Denoising rank for the neighbourhood score; 0 for `min(50, n, d)`.
   */
  size_t rank;
  /*
   Nonzero measures data angles on the denoised scores.
   */
  uint8_t angle_on_denoised;
} MercatMetricsOptions;

/*
 The four preservation scores, each a correlation or overlap in [-1, 1].
 */
typedef struct MercatMetrics {
  double angle;
  double distance;
  double neighborhood;
  double density;
} MercatMetrics;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/*
 Message for the last failed call on this thread, or null if none. The
 pointer stays valid until the next failing call on the same thread.
 */
const char *mercat_last_error(void);

/*
 Library version as a static NUL-terminated string.
 */
const char *mercat_version(void);

/*
 Copies `n * d` row-major values into a new data handle.

 # Safety
 `values` must point to `n * d` readable doubles and `out` to writable
 storage for one pointer.
 */
enum MercatStatus mercat_data_new(const double *values,
                                  size_t n,
                                  size_t d,
                                  struct MercatData **out);

/*
 # Safety
 `data` must be null or a handle from [`mercat_data_new`] not yet freed.
 */
void mercat_data_free(struct MercatData *data);

struct MercatTrainOptions mercat_train_options_default(void);

/*
 Fits an embedding of `data`. `options` may be null for the defaults.

 # Safety
 `data` must be a live data handle, `options` null or valid, and `out`
 writable storage for one pointer.
 */
enum MercatStatus mercat_fit(const struct MercatData *data,
                             const struct MercatTrainOptions *options,
                             struct MercatEmbedding **out);

/*
 Builds an embedding from `n` (colatitude, azimuth) pairs in radians.

 # Safety
 `angles` must point to `2 * n` readable doubles and `out` to writable
 storage for one pointer.
 */
enum MercatStatus mercat_embedding_from_angles(const double *angles,
                                               size_t n,
                                               struct MercatEmbedding **out);

/*
 # Safety
 `embedding` must be null or a live embedding handle.
 */
void mercat_embedding_free(struct MercatEmbedding *embedding);

/*
 Number of embedded points; 0 for a null handle.

 # Safety
 `embedding` must be null or a live embedding handle.
 */
size_t mercat_embedding_len(const struct MercatEmbedding *embedding);

/*
 Denoising rank used by the fit; 0 for embeddings built from angles.

 # Safety
 `embedding` must be null or a live embedding handle.
 */
size_t mercat_embedding_rank(const struct MercatEmbedding *embedding);

/*
 Writes `capacity >= 2 * len` doubles: (colatitude, azimuth) per point.

 # Safety
 `out` must point to `capacity` writable doubles.
 */
enum MercatStatus mercat_embedding_angles(const struct MercatEmbedding *embedding,
                                          double *out,
                                          size_t capacity);

/*
 Writes `capacity >= 3 * len` doubles: unit-vector coordinates per point.

 # Safety
 `out` must point to `capacity` writable doubles.
 */
enum MercatStatus mercat_embedding_unit_vectors(const struct MercatEmbedding *embedding,
                                                double *out,
                                                size_t capacity);

/*
 Number of recorded iterations in the loss trace.

 # Safety
 `embedding` must be null or a live embedding handle.
 */
size_t mercat_embedding_trace_len(const struct MercatEmbedding *embedding);

/*
 Writes the per-iteration loss (root mean square difference) into
 `capacity >= trace_len` doubles.

 # Safety
 `out` must point to `capacity` writable doubles.
 */
enum MercatStatus mercat_embedding_loss_trace(const struct MercatEmbedding *embedding,
                                              double *out,
                                              size_t capacity);

struct MercatMetricsOptions mercat_metrics_options_default(void);

/*
 Scores how well `embedding` preserves the geometry of `data`.
 `options` may be null for the defaults.

 # Safety
 `data` and `embedding` must be live handles, `options` null or valid,
 and `out` writable.
 */
enum MercatStatus mercat_metrics(const struct MercatData *data,
                                 const struct MercatEmbedding *embedding,
                                 const struct MercatMetricsOptions *options,
                                 struct MercatMetrics *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* MERCAT_H */
