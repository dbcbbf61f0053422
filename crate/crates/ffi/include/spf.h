#ifndef SPF_H
#define SPF_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result code of every fallible call.
 */
typedef enum SpfStatus {
  SPF_STATUS_OK = 0,
  SPF_STATUS_NULL_POINTER = 1,
  SPF_STATUS_INVALID_ARGUMENT = 2,
  SPF_STATUS_IO = 3,
  SPF_STATUS_FORMAT = 4,
  SPF_STATUS_DATA = 5,
  SPF_STATUS_PANIC = 6,
} SpfStatus;

typedef enum SpfMethod {
  SPF_METHOD_SPF = 0,
  SPF_METHOD_PF = 1,
} SpfMethod;

typedef enum SpfCellStatus {
  SPF_CELL_STATUS_TRACKED = 0,
  SPF_CELL_STATUS_OUT_OF_VIEW = 1,
} SpfCellStatus;

typedef struct SpfCentroids SpfCentroids;

typedef struct SpfTrackResult SpfTrackResult;

typedef struct SpfVolume SpfVolume;

typedef struct SpfDims {
  size_t t;
  size_t z;
  size_t y;
  size_t x;
} SpfDims;

typedef struct SpfDetectParams {
  double lambda;
  /**
   * Peak neighbourhood along x, y, z.
   */
  size_t peak_window[3];
  /**
   * Negative selects 10% of the dtype maximum.
   */
  int32_t min_intensity;
  size_t min_cluster_size;
} SpfDetectParams;

typedef struct SpfTrackParams {
  enum SpfMethod method;
  size_t particles;
  double alpha;
  double sigma_step[3];
  double sigma_root[3];
  double lambda_rej;
  size_t window[3];
  /**
   * Non-positive selects `0.1 * max²` for the volume's dtype.
   */
  double sigma_lik2;
  size_t max_reject;
  uint64_t seed;
  size_t ref_frame;
} SpfTrackParams;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the most recent failure on this thread. The pointer stays
 * valid until the next failing call on the same thread.
 */
const char *spf_last_error_message(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *spf_version(void);

/**
 * Reads a volume container file.
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out` a valid pointer.
 */
enum SpfStatus spf_volume_read(const char *path, struct SpfVolume **out);

/**
 * # Safety
 * `volume` must come from [`spf_volume_read`] and not be freed already.
 */
void spf_volume_free(struct SpfVolume *volume);

/**
 * # Safety
 * `volume` and `out` must be valid pointers.
 */
enum SpfStatus spf_volume_dims(const struct SpfVolume *volume, struct SpfDims *out);

/**
 * Sets the physical spacing of z slices (default 3).
 *
 * # Safety
 * `volume` must be a valid handle.
 */
enum SpfStatus spf_volume_set_z_scale(struct SpfVolume *volume, double z_scale);

struct SpfDetectParams spf_detect_params_default(void);

/**
 * Detects cells in frame `frame`.
 *
 * # Safety
 * `volume`, `params` and `out` must be valid pointers.
 */
enum SpfStatus spf_detect(const struct SpfVolume *volume,
                          size_t frame,
                          const struct SpfDetectParams *params,
                          struct SpfCentroids **out);

/**
 * Builds a centroid set from `count` packed `(x, y, z)` triples.
 *
 * # Safety
 * `xyz` must point to `3 * count` doubles (may be null when `count` is 0).
 */
enum SpfStatus spf_centroids_from_array(const double *xyz, size_t count, struct SpfCentroids **out);

/**
 * # Safety
 * `centroids` must be a valid handle or null (returns 0).
 */
size_t spf_centroids_len(const struct SpfCentroids *centroids);

/**
 * Copies centroid `k` into `xyz[0..3]`.
 *
 * # Safety
 * `centroids` must be valid and `xyz` must hold 3 doubles.
 */
enum SpfStatus spf_centroids_get(const struct SpfCentroids *centroids, size_t k, double *xyz);

/**
 * # Safety
 * `centroids` must come from this library and not be freed already.
 */
void spf_centroids_free(struct SpfCentroids *centroids);

struct SpfTrackParams spf_track_params_default(void);

/**
 * Tracks the given frame-0 positions through every frame. With
 * `SPF_METHOD_SPF` the tree is the minimum spanning tree of the centroids.
 *
 * # Safety
 * All pointers must be valid.
 */
enum SpfStatus spf_track(const struct SpfVolume *volume,
                         const struct SpfCentroids *centroids,
                         const struct SpfTrackParams *params,
                         struct SpfTrackResult **out);

/**
 * # Safety
 * `result` must be a valid handle or null (returns 0).
 */
size_t spf_result_frames(const struct SpfTrackResult *result);

/**
 * # Safety
 * `result` must be a valid handle or null (returns 0).
 */
size_t spf_result_cells(const struct SpfTrackResult *result);

/**
 * Estimate of cell `k` at frame `t` into `xyz[0..3]` and its status.
 *
 * # Safety
 * `result` must be valid, `xyz` must hold 3 doubles; `status` may be null.
 */
enum SpfStatus spf_result_get(const struct SpfTrackResult *result,
                              size_t t,
                              size_t k,
                              double *xyz,
                              enum SpfCellStatus *status);

/**
 * Writes the result in the `t k x y z status` text format.
 *
 * # Safety
 * `result` must be valid and `path` NUL-terminated.
 */
enum SpfStatus spf_result_write(const struct SpfTrackResult *result, const char *path);

/**
 * # Safety
 * `result` must come from [`spf_track`] and not be freed already.
 */
void spf_result_free(struct SpfTrackResult *result);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SPF_H */
