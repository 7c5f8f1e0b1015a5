#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cgf/geometry.hpp"
#include "cgf/net.hpp"

namespace cgf {

struct Correspondence {
  std::size_t query_index;   // point index in the query cloud
  std::size_t match_index;   // point index in the target cloud
  double distance;           // descriptor-space distance
};

// Descriptor-space nearest neighbor of every query feature.
std::vector<Correspondence> match_features(const FeatureSet& query,
                                           const FeatureSet& target);

// Drops matches whose query point has no ground-truth counterpart in the
// target cloud within tau (both clouds taken to world via their transforms).
std::vector<Correspondence> prune_matches(
    const std::vector<Correspondence>& matches, const PointCloud& query_cloud,
    const RigidTransform& query_to_world, const PointCloud& target_cloud,
    const RigidTransform& target_to_world, double tau);

// Copies of matches with distance replaced by the world-space gap between
// the query point and its matched point under the given transforms.
std::vector<Correspondence> world_residuals(
    const std::vector<Correspondence>& matches, const PointCloud& query_cloud,
    const RigidTransform& query_to_world, const PointCloud& target_cloud,
    const RigidTransform& target_to_world);

// Fraction of retained matches whose matched point lies within `threshold`
// of the query's aligned position.
double precision(const std::vector<Correspondence>& matches,
                 const PointCloud& query_cloud,
                 const RigidTransform& query_to_world,
                 const PointCloud& target_cloud,
                 const RigidTransform& target_to_world, double threshold);

// precision at each threshold; thresholds must be non-decreasing for a
// non-decreasing curve.
std::vector<double> precision_curve(const std::vector<Correspondence>& matches,
                                    const PointCloud& query_cloud,
                                    const RigidTransform& query_to_world,
                                    const PointCloud& target_cloud,
                                    const RigidTransform& target_to_world,
                                    const std::vector<double>& thresholds);

// Linear compression baseline: project histograms onto the top principal
// directions of a reference sample.
struct PcaModel {
  Eigen::VectorXd mean;
  Eigen::MatrixXd components;  // dim x input, rows are directions

  int input_dim() const { return static_cast<int>(components.cols()); }
  int output_dim() const { return static_cast<int>(components.rows()); }
};

// Components ordered by descending eigenvalue; each row's sign is fixed so
// its largest-magnitude entry is positive.
PcaModel fit_pca(const Eigen::MatrixXd& rows, int dim);

FeatureSet project_pca(const PcaModel& model, const Eigen::MatrixXd& histograms,
                       const std::vector<char>& valid);

// Model file: magic line "CGF-PCA1", header line "dims: <out> <in>", then a
// little-endian 64-bit-double blob: mean, then components row-major.
void save_pca(const PcaModel& model, const std::string& path);
PcaModel load_pca(const std::string& path);

// Mean wall-clock milliseconds per exact nearest-neighbor query against the
// target set over all query rows times `repeats`, single threaded. Tree
// construction is excluded from the timing.
double time_queries(const FeatureSet& query, const FeatureSet& target,
                    int repeats);

void write_correspondences_csv(const std::vector<Correspondence>& matches,
                               const std::string& path);
std::vector<Correspondence> read_correspondences_csv(const std::string& path);

void write_precision_csv(const std::vector<double>& thresholds,
                         const std::vector<double>& fractions,
                         const std::string& path);

}  // namespace cgf
