/* C interface to the cgf shared library.
 *
 * Conventions:
 *   - Every fallible call returns a cgf_status; CGF_OK is 0. On failure the
 *     thread-local message from cgf_last_error() describes the cause and no
 *     out-parameter is written.
 *   - Handles returned through a `**out` parameter are owned by the caller
 *     and released with the matching *_free function. Freeing NULL is a
 *     no-op.
 *   - Pointers returned by accessor functions (point buffers, strings)
 *     borrow from their handle and stay valid until it is freed.
 *   - 4x4 pose matrices are row-major double[16] with bottom row 0 0 0 1.
 */
#ifndef CGF_H
#define CGF_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define CGF_API __declspec(dllexport)
#else
#define CGF_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum cgf_status {
  CGF_OK = 0,
  CGF_INVALID_ARGUMENT = 1,
  CGF_IO = 2,
  CGF_PARSE = 3,
  CGF_EMPTY_CLOUD = 4,
  CGF_INVALID_RADIUS = 5,
  CGF_DEGENERATE_NEIGHBORHOOD = 6,
  CGF_SHAPE = 7,
  CGF_MODEL_FORMAT = 8,
  CGF_NO_TRIPLETS = 9,
  CGF_NO_CORRESPONDENCES = 10,
  CGF_DEGENERATE_CLOUD = 11,
  CGF_EMPTY_TARGET = 12,
  CGF_INSUFFICIENT_SAMPLES = 13,
  CGF_NO_RETAINED_MATCHES = 14,
  CGF_DEGENERATE_FIT = 15,
  CGF_NO_CONSENSUS = 16,
  CGF_NO_GROUND_TRUTH = 17,
  CGF_PAIR_NOT_FOUND = 18,
  CGF_UNKNOWN = 19
} cgf_status;

/* Library version string, e.g. "0.1.0". */
CGF_API const char* cgf_version(void);
/* Message of the most recent failure on this thread ("" after a success). */
CGF_API const char* cgf_last_error(void);
/* Stable upper-snake name of a status code, e.g. "INVALID_RADIUS". */
CGF_API const char* cgf_status_name(cgf_status status);

/* Deterministic per-stage seed derived from a root seed and a stage label. */
CGF_API cgf_status cgf_derive_seed(uint64_t root, const char* stage,
                                   uint64_t* out);
/* FNV-1a hash of a file's bytes. */
CGF_API cgf_status cgf_hash_file(const char* path, uint64_t* out);
/* FNV-1a hash of a byte buffer. */
CGF_API cgf_status cgf_hash_bytes(const void* data, size_t size, uint64_t* out);

/* ---- point clouds -------------------------------------------------- */

typedef struct cgf_cloud cgf_cloud;

/* points: count*3 doubles (x y z per point); normals: count*3 or NULL. */
CGF_API cgf_status cgf_cloud_create(const double* points, const double* normals,
                                    size_t count, cgf_cloud** out);
/* Reads .xyz or .ply (ASCII) by extension. */
CGF_API cgf_status cgf_cloud_read(const char* path, cgf_cloud** out);
CGF_API cgf_status cgf_cloud_write(const cgf_cloud* cloud, const char* path);
CGF_API cgf_status cgf_cloud_size(const cgf_cloud* cloud, size_t* out);
CGF_API cgf_status cgf_cloud_has_normals(const cgf_cloud* cloud, int* out);
/* Bounding-box diagonal. */
CGF_API cgf_status cgf_cloud_diameter(const cgf_cloud* cloud, double* out);
/* Borrowed buffer of size()*3 doubles. */
CGF_API cgf_status cgf_cloud_points(const cgf_cloud* cloud, const double** out);
/* Fails with CGF_INVALID_ARGUMENT when the cloud has no normals. */
CGF_API cgf_status cgf_cloud_normals(const cgf_cloud* cloud, const double** out);
CGF_API void cgf_cloud_free(cgf_cloud* cloud);

/* ---- aligned sets --------------------------------------------------- */

typedef struct cgf_set cgf_set;

/* Generates overlapping synthetic views of an analytic surface ("sphere",
 * "torus", "supertoroid", "box_union"): one shared base sampling, cropped to
 * the points facing each view's camera, plus per-view normal-direction
 * Gaussian noise and a randomized local frame with its exact inverse
 * recorded as the to-world transform. */
CGF_API cgf_status cgf_synthesize(const char* surface, int views, int samples,
                                  double noise, uint64_t seed, cgf_set** out);
CGF_API cgf_status cgf_set_read(const char* manifest_path, cgf_set** out);
/* Writes view_INDEX.<format> cloud files plus manifest.txt into directory
 * (created if missing). format is "xyz" or "ply". */
CGF_API cgf_status cgf_set_write(const cgf_set* set, const char* directory,
                                 const char* format);
CGF_API cgf_status cgf_set_size(const cgf_set* set, size_t* out);
/* Copy of view `index`; caller frees. */
CGF_API cgf_status cgf_set_cloud(const cgf_set* set, size_t index,
                                 cgf_cloud** out);
CGF_API cgf_status cgf_set_transform(const cgf_set* set, size_t index,
                                     double matrix[16]);
/* Diagonal of the union bounding box with every view taken to world. */
CGF_API cgf_status cgf_set_diameter(const cgf_set* set, double* out);
/* Counterpart radius: max over views of the median nearest-neighbor gap. */
CGF_API cgf_status cgf_set_eps(const cgf_set* set, double* out);
/* Fraction of view i's points with a view j point within eps in world. */
CGF_API cgf_status cgf_set_overlap(const cgf_set* set, size_t i, size_t j,
                                   double* out);
CGF_API void cgf_set_free(cgf_set* set);

/* ---- spherical histograms ------------------------------------------- */

typedef struct cgf_histogram_params {
  int radial_bins;      /* default 17 */
  int elevation_bins;   /* default 11 */
  int azimuth_bins;     /* default 12 */
  double radius;        /* histogram support radius, required > 0 */
  double min_radius;    /* innermost radial threshold, required > 0 */
  double lrf_radius;    /* local-frame support radius, required > 0 */
  double normal_radius; /* 0: use lrf_radius */
  int threads;          /* 0: hardware concurrency */
} cgf_histogram_params;

typedef struct cgf_histograms cgf_histograms;

CGF_API void cgf_histogram_params_default(cgf_histogram_params* out);
/* Per-point normalized spherical histograms in per-point local frames.
 * Points whose frame cannot be estimated are kept as invalid rows. Uses the
 * cloud's normals when present, otherwise estimates them. */
CGF_API cgf_status cgf_featurize(const cgf_cloud* cloud,
                                 const cgf_histogram_params* params,
                                 cgf_histograms** out);
CGF_API cgf_status cgf_histograms_write(const cgf_histograms* histograms,
                                        const char* path);
CGF_API cgf_status cgf_histograms_read(const char* path, cgf_histograms** out);
CGF_API cgf_status cgf_histograms_count(const cgf_histograms* histograms,
                                        size_t* out);
CGF_API cgf_status cgf_histograms_dim(const cgf_histograms* histograms,
                                      size_t* out);
CGF_API cgf_status cgf_histograms_valid_count(const cgf_histograms* histograms,
                                              size_t* out);
/* valid_out and values_out (dim doubles) may each be NULL. */
CGF_API cgf_status cgf_histograms_get(const cgf_histograms* histograms,
                                      size_t row, int* valid_out,
                                      double* values_out);
CGF_API void cgf_histograms_free(cgf_histograms* histograms);

/* ---- triplet mining -------------------------------------------------- */

typedef struct cgf_mining_params {
  double tau;                     /* positive radius; 0: 1% of set diameter */
  int triplets_per_point;         /* default 40 */
  int hard_negatives_per_point;   /* default 15 */
  int random_negatives_per_point; /* default 25 */
  double min_overlap;             /* default 0.3 */
  uint64_t seed;
  size_t max_anchors_per_pair;    /* 0: every eligible anchor */
} cgf_mining_params;

typedef struct cgf_triplets cgf_triplets;

CGF_API void cgf_mining_params_default(cgf_mining_params* out);
/* Mines anchor/positive/negative histogram triples from every overlapping
 * ordered view pair of the set. histograms holds one handle per view, in
 * set order. */
CGF_API cgf_status cgf_mine(const cgf_set* set,
                            const cgf_histograms* const* histograms,
                            size_t histogram_count,
                            const cgf_mining_params* params,
                            cgf_triplets** out);
CGF_API cgf_status cgf_triplets_write(const cgf_triplets* triplets,
                                      const char* path);
/* Rebinds a cached file against the histogram tables it was mined from. */
CGF_API cgf_status cgf_triplets_read(const char* path,
                                     const cgf_histograms* const* histograms,
                                     size_t histogram_count,
                                     cgf_triplets** out);
/* Concatenates sets, offsetting table indices. */
CGF_API cgf_status cgf_triplets_merge(const cgf_triplets* const* sets,
                                      size_t count, cgf_triplets** out);
CGF_API cgf_status cgf_triplets_count(const cgf_triplets* triplets,
                                      size_t* out);
/* indices: anchor table,row, positive table,row, negative table,row. */
CGF_API cgf_status cgf_triplets_get(const cgf_triplets* triplets, size_t index,
                                    uint32_t indices[6], int* hard_out);
CGF_API void cgf_triplets_free(cgf_triplets* triplets);

/* ---- models (embedding network / PCA baseline) ----------------------- */

typedef struct cgf_train_params {
  int hidden_dims[8];   /* default 512 x5 */
  int hidden_count;
  int output_dim;       /* default 32 */
  double margin;        /* default 1.0 */
  int epochs;           /* default 3 */
  int batch_size;       /* default 512 */
  double learning_rate; /* default 1e-4 */
  double beta1;         /* default 0.9 */
  double beta2;         /* default 0.999 */
  double epsilon;       /* default 1e-8 */
  uint64_t seed;
} cgf_train_params;

typedef enum cgf_model_kind {
  CGF_MODEL_NET = 0,
  CGF_MODEL_PCA = 1
} cgf_model_kind;

typedef struct cgf_model cgf_model;
/* Called once per processed minibatch, in training order. */
typedef void (*cgf_loss_callback)(int epoch, int64_t batch, double loss,
                                  void* user);

CGF_API void cgf_train_params_default(cgf_train_params* out);
/* Trains a fresh embedding network on the triplets with minibatch Adam and
 * the margin hinge loss. on_batch may be NULL. */
CGF_API cgf_status cgf_train(const cgf_triplets* triplets,
                             const cgf_train_params* params,
                             cgf_loss_callback on_batch, void* user,
                             cgf_model** out);
/* Principal-component baseline fitted to the valid rows of the given
 * histogram sets. */
CGF_API cgf_status cgf_fit_pca(const cgf_histograms* const* histograms,
                               size_t histogram_count, int dim,
                               cgf_model** out);
/* Loads either model format, dispatching on the file's magic line. */
CGF_API cgf_status cgf_model_load(const char* path, cgf_model** out);
CGF_API cgf_status cgf_model_save(const cgf_model* model, const char* path);
CGF_API cgf_status cgf_model_kind_of(const cgf_model* model,
                                     cgf_model_kind* out);
CGF_API cgf_status cgf_model_input_dim(const cgf_model* model, size_t* out);
CGF_API cgf_status cgf_model_output_dim(const cgf_model* model, size_t* out);
/* Training margin stored with a network model; fails for PCA models. */
CGF_API cgf_status cgf_model_margin(const cgf_model* model, double* out);
CGF_API void cgf_model_free(cgf_model* model);

/* ---- descriptors ------------------------------------------------------ */

typedef struct cgf_features cgf_features;

/* Embeds every valid histogram row; indices keep the original point ids. */
CGF_API cgf_status cgf_embed(const cgf_model* model,
                             const cgf_histograms* histograms,
                             cgf_features** out);
CGF_API cgf_status cgf_features_write_csv(const cgf_features* features,
                                          const char* path);
CGF_API cgf_status cgf_features_read_csv(const char* path, cgf_features** out);
CGF_API cgf_status cgf_features_count(const cgf_features* features,
                                      size_t* out);
CGF_API cgf_status cgf_features_dim(const cgf_features* features, size_t* out);
/* vector_out (dim doubles) may be NULL. */
CGF_API cgf_status cgf_features_get(const cgf_features* features, size_t row,
                                    size_t* point_index, double* vector_out);
CGF_API void cgf_features_free(cgf_features* features);

/* ---- correspondences --------------------------------------------------- */

typedef struct cgf_matches cgf_matches;

/* Descriptor-space nearest neighbor of every query descriptor. */
CGF_API cgf_status cgf_match(const cgf_features* query,
                             const cgf_features* target, cgf_matches** out);
/* Keeps matches whose query point has a ground-truth counterpart in the
 * target within tau (both clouds taken to world). */
CGF_API cgf_status cgf_prune_matches(const cgf_matches* matches,
                                     const cgf_cloud* query_cloud,
                                     const double query_to_world[16],
                                     const cgf_cloud* target_cloud,
                                     const double target_to_world[16],
                                     double tau, cgf_matches** out);
/* Copy of matches with distance replaced by the world-space gap between the
 * query point and its matched point. */
CGF_API cgf_status cgf_world_residuals(const cgf_matches* matches,
                                       const cgf_cloud* query_cloud,
                                       const double query_to_world[16],
                                       const cgf_cloud* target_cloud,
                                       const double target_to_world[16],
                                       cgf_matches** out);
/* Fraction of matches whose matched point lies within threshold of the
 * query's aligned position. */
CGF_API cgf_status cgf_precision(const cgf_matches* matches,
                                 const cgf_cloud* query_cloud,
                                 const double query_to_world[16],
                                 const cgf_cloud* target_cloud,
                                 const double target_to_world[16],
                                 double threshold, double* out);
/* Precision at each of `count` non-decreasing thresholds. */
CGF_API cgf_status cgf_precision_curve(const cgf_matches* matches,
                                       const cgf_cloud* query_cloud,
                                       const double query_to_world[16],
                                       const cgf_cloud* target_cloud,
                                       const double target_to_world[16],
                                       const double* thresholds, size_t count,
                                       double* fractions_out);
CGF_API cgf_status cgf_matches_count(const cgf_matches* matches, size_t* out);
CGF_API cgf_status cgf_matches_get(const cgf_matches* matches, size_t index,
                                   size_t* query_index, size_t* match_index,
                                   double* distance);
CGF_API cgf_status cgf_matches_write_csv(const cgf_matches* matches,
                                         const char* path);
CGF_API cgf_status cgf_matches_read_csv(const char* path, cgf_matches** out);
CGF_API void cgf_matches_free(cgf_matches* matches);

/* threshold,fraction rows. */
CGF_API cgf_status cgf_precision_csv_write(const double* thresholds,
                                           const double* fractions,
                                           size_t count, const char* path);

/* Mean wall-clock milliseconds per exact nearest-neighbor query of every
 * query descriptor against the target set, repeated `repeats` times; tree
 * construction excluded. */
CGF_API cgf_status cgf_time_queries(const cgf_features* query,
                                    const cgf_features* target, int repeats,
                                    double* ms_per_query);

/* ---- registration ------------------------------------------------------ */

typedef struct cgf_ransac_params {
  int iterations;          /* default 1000 */
  double inlier_threshold; /* required > 0, target units */
  int sample_size;         /* default 3 */
  uint64_t seed;
} cgf_ransac_params;

typedef struct cgf_registration_params {
  cgf_ransac_params ransac;
  double gt_tau;       /* ground-truth pairing radius, required > 0 */
  double success_rmse; /* success when rmse <= this, required > 0 */
} cgf_registration_params;

typedef struct cgf_registration_result {
  double rotation[9]; /* row-major, source frame -> target frame */
  double translation[3];
  double rmse;
  size_t inliers;
  int success;
} cgf_registration_result;

CGF_API void cgf_ransac_params_default(cgf_ransac_params* out);
CGF_API void cgf_registration_params_default(cgf_registration_params* out);
/* Least-squares rigid motion mapping source[i] onto target[i]; count >= 3
 * non-collinear pairs. points are count*3 doubles. */
CGF_API cgf_status cgf_fit_rigid(const double* source, const double* target,
                                 size_t count, double rotation[9],
                                 double translation[3]);
/* RANSAC over the matches without ground truth: rmse is the RMS residual of
 * the final consensus set and success reports consensus only. */
CGF_API cgf_status cgf_ransac(const cgf_matches* matches,
                              const cgf_cloud* source, const cgf_cloud* target,
                              const cgf_ransac_params* params,
                              cgf_registration_result* out);
/* RANSAC followed by ground-truth RMSE scoring under the aligned poses;
 * success compares rmse against params->success_rmse. */
CGF_API cgf_status cgf_register_pair(const cgf_matches* matches,
                                     const cgf_cloud* source,
                                     const double source_to_world[16],
                                     const cgf_cloud* target,
                                     const double target_to_world[16],
                                     const cgf_registration_params* params,
                                     cgf_registration_result* out);
CGF_API cgf_status cgf_registration_write_json(
    const cgf_registration_result* result, const char* path);
CGF_API cgf_status cgf_registration_read_json(const char* path,
                                              cgf_registration_result* out);

#ifdef __cplusplus
}
#endif

#endif /* CGF_H */
