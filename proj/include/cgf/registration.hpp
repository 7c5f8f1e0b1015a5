#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cgf/geometry.hpp"
#include "cgf/matching.hpp"

namespace cgf {

// Least-squares rigid fit mapping source[i] onto target[i] (SVD of the
// cross-covariance with reflection correction).
RigidTransform fit_rigid(const std::vector<Vec3>& source,
                         const std::vector<Vec3>& target);

struct RansacConfig {
  int iterations = 1000;
  double inlier_threshold = 0.0;   // required, in target units
  int sample_size = 3;
  std::uint64_t seed = 0;
};

struct RegistrationResult {
  RigidTransform transform;        // source frame -> target frame
  double rmse = 0.0;               // over ground-truth correspondences
  std::size_t inliers = 0;
  bool success = false;
};

// Correspondence-based RANSAC: samples minimal sets from the matches,
// refits on the consensus set, keeps the largest consensus.
RigidTransform ransac_rigid(const std::vector<Correspondence>& matches,
                            const PointCloud& source, const PointCloud& target,
                            const RansacConfig& config, std::size_t* inliers_out);

// RMSE of the estimated transform over ground-truth correspondences: source
// points with a world-frame counterpart in the target within gt_tau.
double registration_rmse(const RigidTransform& estimated,
                         const PointCloud& source,
                         const RigidTransform& source_to_world,
                         const PointCloud& target,
                         const RigidTransform& target_to_world, double gt_tau);

struct RegistrationConfig {
  RansacConfig ransac;
  double gt_tau = 0.0;             // ground-truth pairing radius
  double success_rmse = 0.0;       // success when rmse <= this
};

RegistrationResult register_pair(const std::vector<Correspondence>& matches,
                                 const PointCloud& source,
                                 const RigidTransform& source_to_world,
                                 const PointCloud& target,
                                 const RigidTransform& target_to_world,
                                 const RegistrationConfig& config);

// JSON result: rotation (9, row-major), translation (3), rmse, inliers,
// success.
void write_registration_json(const RegistrationResult& result,
                             const std::string& path);
RegistrationResult read_registration_json(const std::string& path);

}  // namespace cgf
