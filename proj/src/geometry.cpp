#include "cgf/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "cgf/kdtree.hpp"

namespace cgf {

RigidTransform RigidTransform::inverse() const {
  RigidTransform out;
  out.rotation = rotation.transpose();
  out.translation = -(out.rotation * translation);
  return out;
}

RigidTransform RigidTransform::compose(const RigidTransform& inner) const {
  RigidTransform out;
  out.rotation = rotation * inner.rotation;
  out.translation = rotation * inner.translation + translation;
  return out;
}

Eigen::Matrix4d RigidTransform::matrix() const {
  Eigen::Matrix4d m = Eigen::Matrix4d::Identity();
  m.block<3, 3>(0, 0) = rotation;
  m.block<3, 1>(0, 3) = translation;
  return m;
}

RigidTransform RigidTransform::from_matrix(const Eigen::Matrix4d& m) {
  RigidTransform t;
  t.rotation = m.block<3, 3>(0, 0);
  t.translation = m.block<3, 1>(0, 3);
  return t;
}

void PointCloud::validate() const {
  require(!points.empty(), ErrorCode::EmptyCloud, "point cloud is empty");
  for (const auto& p : points) {
    require(p.allFinite(), ErrorCode::Parse, "point coordinates must be finite");
  }
  if (!normals.empty()) {
    require(normals.size() == points.size(), ErrorCode::Shape,
            "normal count does not match point count");
    for (const auto& n : normals) {
      require(n.allFinite() && std::abs(n.norm() - 1.0) <= 1e-6,
              ErrorCode::Shape, "normals must be unit length");
    }
  }
}

double PointCloud::diameter() const {
  if (diameter_cache_) return *diameter_cache_;
  require(!points.empty(), ErrorCode::EmptyCloud,
          "diameter of an empty cloud is undefined");
  Vec3 lo = points.front();
  Vec3 hi = points.front();
  for (const auto& p : points) {
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
  }
  diameter_cache_ = (hi - lo).norm();
  return *diameter_cache_;
}

PointCloud PointCloud::transformed(const RigidTransform& t) const {
  PointCloud out;
  out.points.reserve(points.size());
  for (const auto& p : points) out.points.push_back(t.apply(p));
  out.normals.reserve(normals.size());
  for (const auto& n : normals) out.normals.push_back(t.apply_direction(n));
  if (viewpoint) out.viewpoint = t.apply(*viewpoint);
  out.diameter_cache_ = diameter_cache_;
  if (!out.diameter_cache_ && !points.empty()) out.diameter_cache_ = diameter();
  return out;
}

double median_nn_distance(const PointCloud& cloud) {
  require(cloud.size() >= 2, ErrorCode::DegenerateCloud,
          "median nearest-neighbor distance needs at least two points");
  KdTree tree(cloud.points);
  std::vector<double> dists(cloud.size());
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    auto two = tree.knn(cloud.points[i], 2);
    dists[i] = two[1].distance;  // two[0] is the point itself at distance 0
  }
  std::size_t mid = (dists.size() - 1) / 2;
  std::nth_element(dists.begin(), dists.begin() + mid, dists.end());
  return dists[mid];
}

double resolution(const std::vector<PointCloud>& clouds) {
  require(!clouds.empty(), ErrorCode::InvalidArgument,
          "resolution needs at least one cloud");
  double best = 0.0;
  for (const auto& cloud : clouds) best = std::max(best, median_nn_distance(cloud));
  return best;
}

RigidTransform random_rigid_transform(std::uint64_t seed, double max_translation) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> uniform(-1.0, 1.0);
  Eigen::Quaterniond q;
  do {
    q = Eigen::Quaterniond(normal(rng), normal(rng), normal(rng), normal(rng));
  } while (q.norm() < 1e-12);
  q.normalize();
  RigidTransform t;
  t.rotation = q.toRotationMatrix();
  for (int i = 0; i < 3; ++i) t.translation[i] = uniform(rng) * max_translation;
  return t;
}

}  // namespace cgf
