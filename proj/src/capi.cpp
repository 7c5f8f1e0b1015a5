#include "cgf.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "cgf/dataset.hpp"
#include "cgf/error.hpp"
#include "cgf/geometry.hpp"
#include "cgf/histogram.hpp"
#include "cgf/io.hpp"
#include "cgf/matching.hpp"
#include "cgf/net.hpp"
#include "cgf/registration.hpp"
#include "cgf/util.hpp"

static_assert(sizeof(cgf::Vec3) == 3 * sizeof(double),
              "Vec3 buffers must be tightly packed");

struct cgf_cloud {
  cgf::PointCloud value;
};
struct cgf_set {
  cgf::AlignedSet value;
};
struct cgf_histograms {
  cgf::FeaturizedCloud value;
};
struct cgf_triplets {
  cgf::TripletSet value;
};
struct cgf_model {
  cgf_model_kind kind = CGF_MODEL_NET;
  cgf::LoadedModel net;
  cgf::PcaModel pca;
};
struct cgf_features {
  cgf::FeatureSet value;
};
struct cgf_matches {
  std::vector<cgf::Correspondence> value;
};

namespace {

thread_local std::string g_last_error;

cgf_status to_status(cgf::ErrorCode code) {
  using cgf::ErrorCode;
  switch (code) {
    case ErrorCode::Ok: return CGF_OK;
    case ErrorCode::InvalidArgument: return CGF_INVALID_ARGUMENT;
    case ErrorCode::Io: return CGF_IO;
    case ErrorCode::Parse: return CGF_PARSE;
    case ErrorCode::EmptyCloud: return CGF_EMPTY_CLOUD;
    case ErrorCode::InvalidRadius: return CGF_INVALID_RADIUS;
    case ErrorCode::DegenerateNeighborhood: return CGF_DEGENERATE_NEIGHBORHOOD;
    case ErrorCode::Shape: return CGF_SHAPE;
    case ErrorCode::ModelFormat: return CGF_MODEL_FORMAT;
    case ErrorCode::NoTriplets: return CGF_NO_TRIPLETS;
    case ErrorCode::NoCorrespondences: return CGF_NO_CORRESPONDENCES;
    case ErrorCode::DegenerateCloud: return CGF_DEGENERATE_CLOUD;
    case ErrorCode::EmptyTarget: return CGF_EMPTY_TARGET;
    case ErrorCode::InsufficientSamples: return CGF_INSUFFICIENT_SAMPLES;
    case ErrorCode::NoRetainedMatches: return CGF_NO_RETAINED_MATCHES;
    case ErrorCode::DegenerateFit: return CGF_DEGENERATE_FIT;
    case ErrorCode::NoConsensus: return CGF_NO_CONSENSUS;
    case ErrorCode::NoGroundTruth: return CGF_NO_GROUND_TRUTH;
    case ErrorCode::PairNotFound: return CGF_PAIR_NOT_FOUND;
    case ErrorCode::Unknown: return CGF_UNKNOWN;
  }
  return CGF_UNKNOWN;
}

template <typename Fn>
cgf_status guarded(Fn&& fn) {
  try {
    fn();
    g_last_error.clear();
    return CGF_OK;
  } catch (const cgf::Error& e) {
    g_last_error = e.what();
    return to_status(e.code());
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return CGF_UNKNOWN;
  } catch (...) {
    g_last_error = "unknown failure";
    return CGF_UNKNOWN;
  }
}

cgf_status null_argument(const char* name) {
  g_last_error = std::string("null argument: ") + name;
  return CGF_INVALID_ARGUMENT;
}

#define CGF_ARG(ptr) \
  do {               \
    if (!(ptr)) return null_argument(#ptr); \
  } while (0)

cgf::RigidTransform transform_from(const double m[16]) {
  Eigen::Matrix4d mat;
  for (int r = 0; r < 4; ++r)
    for (int c = 0; c < 4; ++c) mat(r, c) = m[4 * r + c];
  return cgf::RigidTransform::from_matrix(mat);
}

void transform_to(const cgf::RigidTransform& t, double out[16]) {
  Eigen::Matrix4d mat = t.matrix();
  for (int r = 0; r < 4; ++r)
    for (int c = 0; c < 4; ++c) out[4 * r + c] = mat(r, c);
}

std::vector<cgf::Vec3> vec3_buffer(const double* data, std::size_t count) {
  std::vector<cgf::Vec3> out(count);
  for (std::size_t k = 0; k < count; ++k)
    out[k] = cgf::Vec3(data[3 * k], data[3 * k + 1], data[3 * k + 2]);
  return out;
}

void result_to(const cgf::RegistrationResult& r, cgf_registration_result* out) {
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      out->rotation[3 * i + j] = r.transform.rotation(i, j);
  for (int i = 0; i < 3; ++i) out->translation[i] = r.transform.translation(i);
  out->rmse = r.rmse;
  out->inliers = r.inliers;
  out->success = r.success ? 1 : 0;
}

cgf::RegistrationResult result_from(const cgf_registration_result* in) {
  cgf::RegistrationResult r;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      r.transform.rotation(i, j) = in->rotation[3 * i + j];
  for (int i = 0; i < 3; ++i) r.transform.translation(i) = in->translation[i];
  r.rmse = in->rmse;
  r.inliers = in->inliers;
  r.success = in->success != 0;
  return r;
}

}  // namespace

extern "C" {

const char* cgf_version(void) { return "0.1.0"; }

const char* cgf_last_error(void) { return g_last_error.c_str(); }

const char* cgf_status_name(cgf_status status) {
  switch (status) {
    case CGF_OK: return "OK";
    case CGF_INVALID_ARGUMENT: return "INVALID_ARGUMENT";
    case CGF_IO: return "IO";
    case CGF_PARSE: return "PARSE";
    case CGF_EMPTY_CLOUD: return "EMPTY_CLOUD";
    case CGF_INVALID_RADIUS: return "INVALID_RADIUS";
    case CGF_DEGENERATE_NEIGHBORHOOD: return "DEGENERATE_NEIGHBORHOOD";
    case CGF_SHAPE: return "SHAPE";
    case CGF_MODEL_FORMAT: return "MODEL_FORMAT";
    case CGF_NO_TRIPLETS: return "NO_TRIPLETS";
    case CGF_NO_CORRESPONDENCES: return "NO_CORRESPONDENCES";
    case CGF_DEGENERATE_CLOUD: return "DEGENERATE_CLOUD";
    case CGF_EMPTY_TARGET: return "EMPTY_TARGET";
    case CGF_INSUFFICIENT_SAMPLES: return "INSUFFICIENT_SAMPLES";
    case CGF_NO_RETAINED_MATCHES: return "NO_RETAINED_MATCHES";
    case CGF_DEGENERATE_FIT: return "DEGENERATE_FIT";
    case CGF_NO_CONSENSUS: return "NO_CONSENSUS";
    case CGF_NO_GROUND_TRUTH: return "NO_GROUND_TRUTH";
    case CGF_PAIR_NOT_FOUND: return "PAIR_NOT_FOUND";
    case CGF_UNKNOWN: return "UNKNOWN";
  }
  return "UNKNOWN";
}

cgf_status cgf_derive_seed(uint64_t root, const char* stage, uint64_t* out) {
  CGF_ARG(stage);
  CGF_ARG(out);
  return guarded([&] { *out = cgf::derive_seed(root, stage); });
}

cgf_status cgf_hash_file(const char* path, uint64_t* out) {
  CGF_ARG(path);
  CGF_ARG(out);
  return guarded([&] { *out = cgf::hash_file(path); });
}

cgf_status cgf_hash_bytes(const void* data, size_t size, uint64_t* out) {
  CGF_ARG(out);
  if (size > 0) CGF_ARG(data);
  return guarded([&] { *out = cgf::fnv1a64(data, size); });
}

/* ---- point clouds -------------------------------------------------- */

cgf_status cgf_cloud_create(const double* points, const double* normals,
                            size_t count, cgf_cloud** out) {
  CGF_ARG(points);
  CGF_ARG(out);
  return guarded([&] {
    auto handle = std::make_unique<cgf_cloud>();
    handle->value.points = vec3_buffer(points, count);
    if (normals) handle->value.normals = vec3_buffer(normals, count);
    handle->value.validate();
    *out = handle.release();
  });
}

cgf_status cgf_cloud_read(const char* path, cgf_cloud** out) {
  CGF_ARG(path);
  CGF_ARG(out);
  return guarded([&] {
    auto handle = std::make_unique<cgf_cloud>();
    handle->value = cgf::read_cloud(path);
    *out = handle.release();
  });
}

cgf_status cgf_cloud_write(const cgf_cloud* cloud, const char* path) {
  CGF_ARG(cloud);
  CGF_ARG(path);
  return guarded([&] { cgf::write_cloud(cloud->value, path); });
}

cgf_status cgf_cloud_size(const cgf_cloud* cloud, size_t* out) {
  CGF_ARG(cloud);
  CGF_ARG(out);
  *out = cloud->value.size();
  g_last_error.clear();
  return CGF_OK;
}

cgf_status cgf_cloud_has_normals(const cgf_cloud* cloud, int* out) {
  CGF_ARG(cloud);
  CGF_ARG(out);
  *out = cloud->value.has_normals() ? 1 : 0;
  g_last_error.clear();
  return CGF_OK;
}

cgf_status cgf_cloud_diameter(const cgf_cloud* cloud, double* out) {
  CGF_ARG(cloud);
  CGF_ARG(out);
  return guarded([&] { *out = cloud->value.diameter(); });
}

cgf_status cgf_cloud_points(const cgf_cloud* cloud, const double** out) {
  CGF_ARG(cloud);
  CGF_ARG(out);
  *out = reinterpret_cast<const double*>(cloud->value.points.data());
  g_last_error.clear();
  return CGF_OK;
}

cgf_status cgf_cloud_normals(const cgf_cloud* cloud, const double** out) {
  CGF_ARG(cloud);
  CGF_ARG(out);
  return guarded([&] {
    cgf::require(cloud->value.has_normals(), cgf::ErrorCode::InvalidArgument,
                 "cloud has no normals");
    *out = reinterpret_cast<const double*>(cloud->value.normals.data());
  });
}

void cgf_cloud_free(cgf_cloud* cloud) { delete cloud; }

/* ---- aligned sets --------------------------------------------------- */

cgf_status cgf_synthesize(const char* surface, int views, int samples,
                          double noise, uint64_t seed, cgf_set** out) {
  CGF_ARG(surface);
  CGF_ARG(out);
  return guarded([&] {
    cgf::SynthConfig config;
    config.surface = cgf::surface_from_name(surface);
    config.views = views;
    config.samples = samples;
    config.noise = noise;
    config.seed = seed;
    auto handle = std::make_unique<cgf_set>();
    handle->value = cgf::synthesize(config);
    *out = handle.release();
  });
}

cgf_status cgf_set_read(const char* manifest_path, cgf_set** out) {
  CGF_ARG(manifest_path);
  CGF_ARG(out);
  return guarded([&] {
    auto handle = std::make_unique<cgf_set>();
    handle->value = cgf::read_aligned_set(manifest_path);
    *out = handle.release();
  });
}

cgf_status cgf_set_write(const cgf_set* set, const char* directory,
                         const char* format) {
  CGF_ARG(set);
  CGF_ARG(directory);
  CGF_ARG(format);
  return guarded([&] {
    std::string ext = format;
    cgf::require(ext == "xyz" || ext == "ply", cgf::ErrorCode::InvalidArgument,
                 "format must be xyz or ply");
    std::filesystem::path dir(directory);
    std::filesystem::create_directories(dir);
    std::vector<std::string> names(set->value.clouds.size());
    for (std::size_t k = 0; k < set->value.clouds.size(); ++k) {
      char buf[32];
      std::snprintf(buf, sizeof buf, "view_%03zu.%s", k, ext.c_str());
      names[k] = buf;
      cgf::write_cloud(set->value.clouds[k], (dir / names[k]).string());
    }
    cgf::write_aligned_set_manifest(names, set->value.to_world,
                                    (dir / "manifest.txt").string());
  });
}

cgf_status cgf_set_size(const cgf_set* set, size_t* out) {
  CGF_ARG(set);
  CGF_ARG(out);
  *out = set->value.clouds.size();
  g_last_error.clear();
  return CGF_OK;
}

cgf_status cgf_set_cloud(const cgf_set* set, size_t index, cgf_cloud** out) {
  CGF_ARG(set);
  CGF_ARG(out);
  return guarded([&] {
    cgf::require(index < set->value.clouds.size(),
                 cgf::ErrorCode::InvalidArgument, "view index out of range");
    auto handle = std::make_unique<cgf_cloud>();
    handle->value = set->value.clouds[index];
    *out = handle.release();
  });
}

cgf_status cgf_set_transform(const cgf_set* set, size_t index,
                             double matrix[16]) {
  CGF_ARG(set);
  CGF_ARG(matrix);
  return guarded([&] {
    cgf::require(index < set->value.to_world.size(),
                 cgf::ErrorCode::InvalidArgument, "view index out of range");
    transform_to(set->value.to_world[index], matrix);
  });
}

cgf_status cgf_set_diameter(const cgf_set* set, double* out) {
  CGF_ARG(set);
  CGF_ARG(out);
  return guarded([&] { *out = cgf::aligned_set_diameter(set->value); });
}

cgf_status cgf_set_eps(const cgf_set* set, double* out) {
  CGF_ARG(set);
  CGF_ARG(out);
  return guarded([&] { *out = cgf::compute_eps(set->value); });
}

cgf_status cgf_set_overlap(const cgf_set* set, size_t i, size_t j,
                           double* out) {
  CGF_ARG(set);
  CGF_ARG(out);
  return guarded([&] {
    cgf::require(i < set->value.clouds.size() && j < set->value.clouds.size(),
                 cgf::ErrorCode::InvalidArgument, "view index out of range");
    *out = cgf::overlap_fraction(set->value, i, j);
  });
}

void cgf_set_free(cgf_set* set) { delete set; }

/* ---- spherical histograms ------------------------------------------- */

void cgf_histogram_params_default(cgf_histogram_params* out) {
  if (!out) return;
  cgf::HistogramConfig defaults;
  out->radial_bins = defaults.radial_bins;
  out->elevation_bins = defaults.elevation_bins;
  out->azimuth_bins = defaults.azimuth_bins;
  out->radius = defaults.radius;
  out->min_radius = defaults.min_radius;
  out->lrf_radius = defaults.lrf_radius;
  out->normal_radius = defaults.normal_radius;
  out->threads = defaults.threads;
}

static cgf::HistogramConfig config_from(const cgf_histogram_params* p) {
  cgf::HistogramConfig config;
  config.radial_bins = p->radial_bins;
  config.elevation_bins = p->elevation_bins;
  config.azimuth_bins = p->azimuth_bins;
  config.radius = p->radius;
  config.min_radius = p->min_radius;
  config.lrf_radius = p->lrf_radius;
  config.normal_radius = p->normal_radius;
  config.threads = p->threads;
  return config;
}

cgf_status cgf_featurize(const cgf_cloud* cloud,
                         const cgf_histogram_params* params,
                         cgf_histograms** out) {
  CGF_ARG(cloud);
  CGF_ARG(params);
  CGF_ARG(out);
  return guarded([&] {
    auto handle = std::make_unique<cgf_histograms>();
    handle->value = cgf::featurize(cloud->value, config_from(params));
    *out = handle.release();
  });
}

cgf_status cgf_histograms_write(const cgf_histograms* histograms,
                                const char* path) {
  CGF_ARG(histograms);
  CGF_ARG(path);
  return guarded([&] { cgf::write_histograms(histograms->value, path); });
}

cgf_status cgf_histograms_read(const char* path, cgf_histograms** out) {
  CGF_ARG(path);
  CGF_ARG(out);
  return guarded([&] {
    auto handle = std::make_unique<cgf_histograms>();
    handle->value = cgf::read_histograms(path);
    *out = handle.release();
  });
}

cgf_status cgf_histograms_count(const cgf_histograms* histograms, size_t* out) {
  CGF_ARG(histograms);
  CGF_ARG(out);
  *out = histograms->value.size();
  g_last_error.clear();
  return CGF_OK;
}

cgf_status cgf_histograms_dim(const cgf_histograms* histograms, size_t* out) {
  CGF_ARG(histograms);
  CGF_ARG(out);
  *out = static_cast<size_t>(histograms->value.values.cols());
  g_last_error.clear();
  return CGF_OK;
}

cgf_status cgf_histograms_valid_count(const cgf_histograms* histograms,
                                      size_t* out) {
  CGF_ARG(histograms);
  CGF_ARG(out);
  *out = histograms->value.valid_count();
  g_last_error.clear();
  return CGF_OK;
}

cgf_status cgf_histograms_get(const cgf_histograms* histograms, size_t row,
                              int* valid_out, double* values_out) {
  CGF_ARG(histograms);
  return guarded([&] {
    const auto& h = histograms->value;
    cgf::require(row < h.size(), cgf::ErrorCode::InvalidArgument,
                 "row out of range");
    if (valid_out) *valid_out = h.valid[row] ? 1 : 0;
    if (values_out)
      Eigen::Map<Eigen::RowVectorXd>(values_out, h.values.cols()) =
          h.values.row(static_cast<Eigen::Index>(row));
  });
}

void cgf_histograms_free(cgf_histograms* histograms) { delete histograms; }

/* ---- triplet mining -------------------------------------------------- */

void cgf_mining_params_default(cgf_mining_params* out) {
  if (!out) return;
  cgf::MiningConfig defaults;
  out->tau = defaults.tau;
  out->triplets_per_point = defaults.triplets_per_point;
  out->hard_negatives_per_point = defaults.hard_negatives_per_point;
  out->random_negatives_per_point = defaults.random_negatives_per_point;
  out->min_overlap = defaults.min_overlap;
  out->seed = defaults.seed;
  out->max_anchors_per_pair = defaults.max_anchors_per_pair;
}

static cgf::MiningConfig mining_from(const cgf_mining_params* p) {
  cgf::MiningConfig config;
  config.tau = p->tau;
  config.triplets_per_point = p->triplets_per_point;
  config.hard_negatives_per_point = p->hard_negatives_per_point;
  config.random_negatives_per_point = p->random_negatives_per_point;
  config.min_overlap = p->min_overlap;
  config.seed = p->seed;
  config.max_anchors_per_pair = p->max_anchors_per_pair;
  return config;
}

cgf_status cgf_mine(const cgf_set* set, const cgf_histograms* const* histograms,
                    size_t histogram_count, const cgf_mining_params* params,
                    cgf_triplets** out) {
  CGF_ARG(set);
  CGF_ARG(histograms);
  CGF_ARG(params);
  CGF_ARG(out);
  return guarded([&] {
    cgf::require(histogram_count == set->value.clouds.size(),
                 cgf::ErrorCode::Shape,
                 "need one histogram set per view of the aligned set");
    std::vector<cgf::FeaturizedCloud> features;
    features.reserve(histogram_count);
    for (size_t k = 0; k < histogram_count; ++k) {
      cgf::require(histograms[k] != nullptr, cgf::ErrorCode::InvalidArgument,
                   "null histogram handle");
      features.push_back(histograms[k]->value);
    }
    auto handle = std::make_unique<cgf_triplets>();
    handle->value = cgf::mine_all(set->value, features, mining_from(params));
    *out = handle.release();
  });
}

cgf_status cgf_triplets_write(const cgf_triplets* triplets, const char* path) {
  CGF_ARG(triplets);
  CGF_ARG(path);
  return guarded([&] { cgf::write_triplets(triplets->value, path); });
}

cgf_status cgf_triplets_read(const char* path,
                             const cgf_histograms* const* histograms,
                             size_t histogram_count, cgf_triplets** out) {
  CGF_ARG(path);
  CGF_ARG(histograms);
  CGF_ARG(out);
  return guarded([&] {
    std::vector<Eigen::MatrixXd> tables;
    tables.reserve(histogram_count);
    for (size_t k = 0; k < histogram_count; ++k) {
      cgf::require(histograms[k] != nullptr, cgf::ErrorCode::InvalidArgument,
                   "null histogram handle");
      tables.push_back(histograms[k]->value.values);
    }
    auto handle = std::make_unique<cgf_triplets>();
    handle->value = cgf::read_triplets(path, std::move(tables));
    *out = handle.release();
  });
}

cgf_status cgf_triplets_merge(const cgf_triplets* const* sets, size_t count,
                              cgf_triplets** out) {
  CGF_ARG(sets);
  CGF_ARG(out);
  return guarded([&] {
    std::vector<cgf::TripletSet> copies;
    copies.reserve(count);
    for (size_t k = 0; k < count; ++k) {
      cgf::require(sets[k] != nullptr, cgf::ErrorCode::InvalidArgument,
                   "null triplet handle");
      copies.push_back(sets[k]->value);
    }
    auto handle = std::make_unique<cgf_triplets>();
    handle->value = cgf::merge_triplet_sets(std::move(copies));
    *out = handle.release();
  });
}

cgf_status cgf_triplets_count(const cgf_triplets* triplets, size_t* out) {
  CGF_ARG(triplets);
  CGF_ARG(out);
  *out = triplets->value.size();
  g_last_error.clear();
  return CGF_OK;
}

cgf_status cgf_triplets_get(const cgf_triplets* triplets, size_t index,
                            uint32_t indices[6], int* hard_out) {
  CGF_ARG(triplets);
  CGF_ARG(indices);
  return guarded([&] {
    cgf::require(index < triplets->value.size(),
                 cgf::ErrorCode::InvalidArgument, "triplet index out of range");
    const auto& t = triplets->value.entries[index];
    indices[0] = t.anchor_table;
    indices[1] = t.anchor_row;
    indices[2] = t.positive_table;
    indices[3] = t.positive_row;
    indices[4] = t.negative_table;
    indices[5] = t.negative_row;
    if (hard_out) *hard_out = t.hard ? 1 : 0;
  });
}

void cgf_triplets_free(cgf_triplets* triplets) { delete triplets; }

/* ---- models ----------------------------------------------------------- */

void cgf_train_params_default(cgf_train_params* out) {
  if (!out) return;
  cgf::TrainConfig defaults;
  out->hidden_count = static_cast<int>(defaults.hidden_dims.size());
  for (int k = 0; k < 8; ++k)
    out->hidden_dims[k] =
        k < out->hidden_count ? defaults.hidden_dims[static_cast<size_t>(k)] : 0;
  out->output_dim = defaults.output_dim;
  out->margin = defaults.margin;
  out->epochs = defaults.epochs;
  out->batch_size = defaults.batch_size;
  out->learning_rate = defaults.adam.learning_rate;
  out->beta1 = defaults.adam.beta1;
  out->beta2 = defaults.adam.beta2;
  out->epsilon = defaults.adam.epsilon;
  out->seed = 0;
}

cgf_status cgf_train(const cgf_triplets* triplets,
                     const cgf_train_params* params, cgf_loss_callback on_batch,
                     void* user, cgf_model** out) {
  CGF_ARG(triplets);
  CGF_ARG(params);
  CGF_ARG(out);
  return guarded([&] {
    cgf::require(params->hidden_count >= 1 && params->hidden_count <= 8,
                 cgf::ErrorCode::InvalidArgument,
                 "hidden_count must be in [1, 8]");
    cgf::require(!triplets->value.tables.empty(),
                 cgf::ErrorCode::NoTriplets, "triplet set has no tables");

    cgf::TrainConfig config;
    config.hidden_dims.assign(params->hidden_dims,
                              params->hidden_dims + params->hidden_count);
    config.output_dim = params->output_dim;
    config.margin = params->margin;
    config.epochs = params->epochs;
    config.batch_size = params->batch_size;
    config.adam.learning_rate = params->learning_rate;
    config.adam.beta1 = params->beta1;
    config.adam.beta2 = params->beta2;
    config.adam.epsilon = params->epsilon;
    config.seed = cgf::derive_seed(params->seed, "shuffle");

    std::vector<int> dims;
    dims.push_back(static_cast<int>(triplets->value.tables.front().cols()));
    dims.insert(dims.end(), config.hidden_dims.begin(),
                config.hidden_dims.end());
    dims.push_back(config.output_dim);

    auto handle = std::make_unique<cgf_model>();
    handle->kind = CGF_MODEL_NET;
    handle->net.net = cgf::Mlp::init(dims, cgf::derive_seed(params->seed, "init"));
    handle->net.margin = config.margin;
    auto trace = cgf::train(handle->net.net, triplets->value, config);
    if (on_batch)
      for (const auto& record : trace)
        on_batch(record.epoch, record.batch, record.loss, user);
    *out = handle.release();
  });
}

cgf_status cgf_fit_pca(const cgf_histograms* const* histograms,
                       size_t histogram_count, int dim, cgf_model** out) {
  CGF_ARG(histograms);
  CGF_ARG(out);
  return guarded([&] {
    cgf::require(histogram_count > 0, cgf::ErrorCode::InvalidArgument,
                 "need at least one histogram set");
    Eigen::Index rows = 0, cols = 0;
    for (size_t k = 0; k < histogram_count; ++k) {
      cgf::require(histograms[k] != nullptr, cgf::ErrorCode::InvalidArgument,
                   "null histogram handle");
      const auto& h = histograms[k]->value;
      rows += static_cast<Eigen::Index>(h.valid_count());
      if (k == 0)
        cols = h.values.cols();
      else
        cgf::require(h.values.cols() == cols, cgf::ErrorCode::Shape,
                     "histogram sets have mismatched dimensions");
    }
    Eigen::MatrixXd stacked(rows, cols);
    Eigen::Index at = 0;
    for (size_t k = 0; k < histogram_count; ++k) {
      const auto& h = histograms[k]->value;
      for (std::size_t r = 0; r < h.size(); ++r)
        if (h.valid[r])
          stacked.row(at++) = h.values.row(static_cast<Eigen::Index>(r));
    }
    auto handle = std::make_unique<cgf_model>();
    handle->kind = CGF_MODEL_PCA;
    handle->pca = cgf::fit_pca(stacked, dim);
    *out = handle.release();
  });
}

cgf_status cgf_model_load(const char* path, cgf_model** out) {
  CGF_ARG(path);
  CGF_ARG(out);
  return guarded([&] {
    std::ifstream in(path);
    cgf::require(in.good(), cgf::ErrorCode::Io,
                 std::string("cannot open: ") + path);
    std::string magic;
    std::getline(in, magic);
    if (!magic.empty() && magic.back() == '\r') magic.pop_back();
    in.close();
    auto handle = std::make_unique<cgf_model>();
    if (magic == "CGF-NET1") {
      handle->kind = CGF_MODEL_NET;
      handle->net = cgf::load_model(path);
    } else if (magic == "CGF-PCA1") {
      handle->kind = CGF_MODEL_PCA;
      handle->pca = cgf::load_pca(path);
    } else {
      cgf::throw_error(cgf::ErrorCode::ModelFormat,
                       std::string(path) + ": unrecognized model magic");
    }
    *out = handle.release();
  });
}

cgf_status cgf_model_save(const cgf_model* model, const char* path) {
  CGF_ARG(model);
  CGF_ARG(path);
  return guarded([&] {
    if (model->kind == CGF_MODEL_NET)
      cgf::save_model(model->net.net, model->net.margin, path);
    else
      cgf::save_pca(model->pca, path);
  });
}

cgf_status cgf_model_kind_of(const cgf_model* model, cgf_model_kind* out) {
  CGF_ARG(model);
  CGF_ARG(out);
  *out = model->kind;
  g_last_error.clear();
  return CGF_OK;
}

cgf_status cgf_model_input_dim(const cgf_model* model, size_t* out) {
  CGF_ARG(model);
  CGF_ARG(out);
  *out = static_cast<size_t>(model->kind == CGF_MODEL_NET
                                 ? model->net.net.input_dim()
                                 : model->pca.input_dim());
  g_last_error.clear();
  return CGF_OK;
}

cgf_status cgf_model_output_dim(const cgf_model* model, size_t* out) {
  CGF_ARG(model);
  CGF_ARG(out);
  *out = static_cast<size_t>(model->kind == CGF_MODEL_NET
                                 ? model->net.net.output_dim()
                                 : model->pca.output_dim());
  g_last_error.clear();
  return CGF_OK;
}

cgf_status cgf_model_margin(const cgf_model* model, double* out) {
  CGF_ARG(model);
  CGF_ARG(out);
  return guarded([&] {
    cgf::require(model->kind == CGF_MODEL_NET, cgf::ErrorCode::InvalidArgument,
                 "margin is only stored with network models");
    *out = model->net.margin;
  });
}

void cgf_model_free(cgf_model* model) { delete model; }

/* ---- descriptors ------------------------------------------------------ */

cgf_status cgf_embed(const cgf_model* model, const cgf_histograms* histograms,
                     cgf_features** out) {
  CGF_ARG(model);
  CGF_ARG(histograms);
  CGF_ARG(out);
  return guarded([&] {
    auto handle = std::make_unique<cgf_features>();
    if (model->kind == CGF_MODEL_NET)
      handle->value = cgf::embed_all(model->net.net, histograms->value.values,
                                     histograms->value.valid);
    else
      handle->value = cgf::project_pca(model->pca, histograms->value.values,
                                       histograms->value.valid);
    *out = handle.release();
  });
}

cgf_status cgf_features_write_csv(const cgf_features* features,
                                  const char* path) {
  CGF_ARG(features);
  CGF_ARG(path);
  return guarded([&] { cgf::write_feature_csv(features->value, path); });
}

cgf_status cgf_features_read_csv(const char* path, cgf_features** out) {
  CGF_ARG(path);
  CGF_ARG(out);
  return guarded([&] {
    auto handle = std::make_unique<cgf_features>();
    handle->value = cgf::read_feature_csv(path);
    *out = handle.release();
  });
}

cgf_status cgf_features_count(const cgf_features* features, size_t* out) {
  CGF_ARG(features);
  CGF_ARG(out);
  *out = features->value.size();
  g_last_error.clear();
  return CGF_OK;
}

cgf_status cgf_features_dim(const cgf_features* features, size_t* out) {
  CGF_ARG(features);
  CGF_ARG(out);
  *out = static_cast<size_t>(features->value.dim);
  g_last_error.clear();
  return CGF_OK;
}

cgf_status cgf_features_get(const cgf_features* features, size_t row,
                            size_t* point_index, double* vector_out) {
  CGF_ARG(features);
  return guarded([&] {
    const auto& f = features->value;
    cgf::require(row < f.size(), cgf::ErrorCode::InvalidArgument,
                 "row out of range");
    if (point_index) *point_index = f.indices[row];
    if (vector_out)
      Eigen::Map<Eigen::RowVectorXd>(vector_out, f.vectors.cols()) =
          f.vectors.row(static_cast<Eigen::Index>(row));
  });
}

void cgf_features_free(cgf_features* features) { delete features; }

/* ---- correspondences --------------------------------------------------- */

cgf_status cgf_match(const cgf_features* query, const cgf_features* target,
                     cgf_matches** out) {
  CGF_ARG(query);
  CGF_ARG(target);
  CGF_ARG(out);
  return guarded([&] {
    auto handle = std::make_unique<cgf_matches>();
    handle->value = cgf::match_features(query->value, target->value);
    *out = handle.release();
  });
}

cgf_status cgf_prune_matches(const cgf_matches* matches,
                             const cgf_cloud* query_cloud,
                             const double query_to_world[16],
                             const cgf_cloud* target_cloud,
                             const double target_to_world[16], double tau,
                             cgf_matches** out) {
  CGF_ARG(matches);
  CGF_ARG(query_cloud);
  CGF_ARG(query_to_world);
  CGF_ARG(target_cloud);
  CGF_ARG(target_to_world);
  CGF_ARG(out);
  return guarded([&] {
    auto handle = std::make_unique<cgf_matches>();
    handle->value = cgf::prune_matches(
        matches->value, query_cloud->value, transform_from(query_to_world),
        target_cloud->value, transform_from(target_to_world), tau);
    *out = handle.release();
  });
}

cgf_status cgf_world_residuals(const cgf_matches* matches,
                               const cgf_cloud* query_cloud,
                               const double query_to_world[16],
                               const cgf_cloud* target_cloud,
                               const double target_to_world[16],
                               cgf_matches** out) {
  CGF_ARG(matches);
  CGF_ARG(query_cloud);
  CGF_ARG(query_to_world);
  CGF_ARG(target_cloud);
  CGF_ARG(target_to_world);
  CGF_ARG(out);
  return guarded([&] {
    auto handle = std::make_unique<cgf_matches>();
    handle->value = cgf::world_residuals(
        matches->value, query_cloud->value, transform_from(query_to_world),
        target_cloud->value, transform_from(target_to_world));
    *out = handle.release();
  });
}

cgf_status cgf_precision(const cgf_matches* matches,
                         const cgf_cloud* query_cloud,
                         const double query_to_world[16],
                         const cgf_cloud* target_cloud,
                         const double target_to_world[16], double threshold,
                         double* out) {
  CGF_ARG(matches);
  CGF_ARG(query_cloud);
  CGF_ARG(query_to_world);
  CGF_ARG(target_cloud);
  CGF_ARG(target_to_world);
  CGF_ARG(out);
  return guarded([&] {
    *out = cgf::precision(matches->value, query_cloud->value,
                          transform_from(query_to_world), target_cloud->value,
                          transform_from(target_to_world), threshold);
  });
}

cgf_status cgf_precision_curve(const cgf_matches* matches,
                               const cgf_cloud* query_cloud,
                               const double query_to_world[16],
                               const cgf_cloud* target_cloud,
                               const double target_to_world[16],
                               const double* thresholds, size_t count,
                               double* fractions_out) {
  CGF_ARG(matches);
  CGF_ARG(query_cloud);
  CGF_ARG(query_to_world);
  CGF_ARG(target_cloud);
  CGF_ARG(target_to_world);
  CGF_ARG(thresholds);
  CGF_ARG(fractions_out);
  return guarded([&] {
    std::vector<double> ts(thresholds, thresholds + count);
    auto fractions = cgf::precision_curve(
        matches->value, query_cloud->value, transform_from(query_to_world),
        target_cloud->value, transform_from(target_to_world), ts);
    std::copy(fractions.begin(), fractions.end(), fractions_out);
  });
}

cgf_status cgf_matches_count(const cgf_matches* matches, size_t* out) {
  CGF_ARG(matches);
  CGF_ARG(out);
  *out = matches->value.size();
  g_last_error.clear();
  return CGF_OK;
}

cgf_status cgf_matches_get(const cgf_matches* matches, size_t index,
                           size_t* query_index, size_t* match_index,
                           double* distance) {
  CGF_ARG(matches);
  return guarded([&] {
    cgf::require(index < matches->value.size(),
                 cgf::ErrorCode::InvalidArgument, "match index out of range");
    const auto& m = matches->value[index];
    if (query_index) *query_index = m.query_index;
    if (match_index) *match_index = m.match_index;
    if (distance) *distance = m.distance;
  });
}

cgf_status cgf_matches_write_csv(const cgf_matches* matches, const char* path) {
  CGF_ARG(matches);
  CGF_ARG(path);
  return guarded([&] { cgf::write_correspondences_csv(matches->value, path); });
}

cgf_status cgf_matches_read_csv(const char* path, cgf_matches** out) {
  CGF_ARG(path);
  CGF_ARG(out);
  return guarded([&] {
    auto handle = std::make_unique<cgf_matches>();
    handle->value = cgf::read_correspondences_csv(path);
    *out = handle.release();
  });
}

void cgf_matches_free(cgf_matches* matches) { delete matches; }

cgf_status cgf_precision_csv_write(const double* thresholds,
                                   const double* fractions, size_t count,
                                   const char* path) {
  CGF_ARG(thresholds);
  CGF_ARG(fractions);
  CGF_ARG(path);
  return guarded([&] {
    std::vector<double> ts(thresholds, thresholds + count);
    std::vector<double> fs(fractions, fractions + count);
    cgf::write_precision_csv(ts, fs, path);
  });
}

cgf_status cgf_time_queries(const cgf_features* query,
                            const cgf_features* target, int repeats,
                            double* ms_per_query) {
  CGF_ARG(query);
  CGF_ARG(target);
  CGF_ARG(ms_per_query);
  return guarded([&] {
    *ms_per_query = cgf::time_queries(query->value, target->value, repeats);
  });
}

/* ---- registration ------------------------------------------------------ */

void cgf_ransac_params_default(cgf_ransac_params* out) {
  if (!out) return;
  cgf::RansacConfig defaults;
  out->iterations = defaults.iterations;
  out->inlier_threshold = defaults.inlier_threshold;
  out->sample_size = defaults.sample_size;
  out->seed = defaults.seed;
}

void cgf_registration_params_default(cgf_registration_params* out) {
  if (!out) return;
  cgf_ransac_params_default(&out->ransac);
  cgf::RegistrationConfig defaults;
  out->gt_tau = defaults.gt_tau;
  out->success_rmse = defaults.success_rmse;
}

static cgf::RansacConfig ransac_from(const cgf_ransac_params* p) {
  cgf::RansacConfig config;
  config.iterations = p->iterations;
  config.inlier_threshold = p->inlier_threshold;
  config.sample_size = p->sample_size;
  config.seed = p->seed;
  return config;
}

cgf_status cgf_fit_rigid(const double* source, const double* target,
                         size_t count, double rotation[9],
                         double translation[3]) {
  CGF_ARG(source);
  CGF_ARG(target);
  CGF_ARG(rotation);
  CGF_ARG(translation);
  return guarded([&] {
    auto t = cgf::fit_rigid(vec3_buffer(source, count),
                            vec3_buffer(target, count));
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) rotation[3 * i + j] = t.rotation(i, j);
    for (int i = 0; i < 3; ++i) translation[i] = t.translation(i);
  });
}

cgf_status cgf_ransac(const cgf_matches* matches, const cgf_cloud* source,
                      const cgf_cloud* target, const cgf_ransac_params* params,
                      cgf_registration_result* out) {
  CGF_ARG(matches);
  CGF_ARG(source);
  CGF_ARG(target);
  CGF_ARG(params);
  CGF_ARG(out);
  return guarded([&] {
    cgf::RegistrationResult r;
    r.transform = cgf::ransac_rigid(matches->value, source->value,
                                    target->value, ransac_from(params),
                                    &r.inliers);
    double sum = 0.0;
    std::size_t used = 0;
    for (const auto& m : matches->value) {
      double gap = (r.transform.apply(source->value.points[m.query_index]) -
                    target->value.points[m.match_index])
                       .norm();
      if (gap <= params->inlier_threshold) {
        sum += gap * gap;
        ++used;
      }
    }
    r.rmse = used ? std::sqrt(sum / static_cast<double>(used)) : 0.0;
    r.success = true;
    result_to(r, out);
  });
}

cgf_status cgf_register_pair(const cgf_matches* matches,
                             const cgf_cloud* source,
                             const double source_to_world[16],
                             const cgf_cloud* target,
                             const double target_to_world[16],
                             const cgf_registration_params* params,
                             cgf_registration_result* out) {
  CGF_ARG(matches);
  CGF_ARG(source);
  CGF_ARG(source_to_world);
  CGF_ARG(target);
  CGF_ARG(target_to_world);
  CGF_ARG(params);
  CGF_ARG(out);
  return guarded([&] {
    cgf::RegistrationConfig config;
    config.ransac = ransac_from(&params->ransac);
    config.gt_tau = params->gt_tau;
    config.success_rmse = params->success_rmse;
    auto r = cgf::register_pair(matches->value, source->value,
                                transform_from(source_to_world), target->value,
                                transform_from(target_to_world), config);
    result_to(r, out);
  });
}

cgf_status cgf_registration_write_json(const cgf_registration_result* result,
                                       const char* path) {
  CGF_ARG(result);
  CGF_ARG(path);
  return guarded(
      [&] { cgf::write_registration_json(result_from(result), path); });
}

cgf_status cgf_registration_read_json(const char* path,
                                      cgf_registration_result* out) {
  CGF_ARG(path);
  CGF_ARG(out);
  return guarded([&] { result_to(cgf::read_registration_json(path), out); });
}

}  // extern "C"
