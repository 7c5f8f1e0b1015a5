#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "cgf/error.hpp"

namespace cgf {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

struct RigidTransform {
  Mat3 rotation = Mat3::Identity();
  Vec3 translation = Vec3::Zero();

  Vec3 apply(const Vec3& p) const { return rotation * p + translation; }
  Vec3 apply_direction(const Vec3& d) const { return rotation * d; }

  RigidTransform inverse() const;
  RigidTransform compose(const RigidTransform& inner) const;

  Eigen::Matrix4d matrix() const;
  static RigidTransform from_matrix(const Eigen::Matrix4d& m);
};

// Normals, when present, are unit length and parallel-indexed with points.
// The viewpoint (sensor origin in the cloud's own frame) is optional; it
// orients estimated normals when available.
class PointCloud {
 public:
  PointCloud() = default;

  std::vector<Vec3> points;
  std::vector<Vec3> normals;
  std::optional<Vec3> viewpoint;

  std::size_t size() const { return points.size(); }
  bool empty() const { return points.empty(); }
  bool has_normals() const { return !normals.empty(); }

  void validate() const;

  // Bounding-box diagonal. Cached after the first call; transforms carry the
  // cache over so radii derived from it stay consistent across poses.
  double diameter() const;

  PointCloud transformed(const RigidTransform& t) const;

 private:
  mutable std::optional<double> diameter_cache_;
};

// Median (lower middle for even counts) of each point's distance to its
// nearest other point.
double median_nn_distance(const PointCloud& cloud);

// Resolution of a set of clouds: the max over clouds of the median
// nearest-neighbor distance.
double resolution(const std::vector<PointCloud>& clouds);

RigidTransform random_rigid_transform(std::uint64_t seed, double max_translation);

}  // namespace cgf
