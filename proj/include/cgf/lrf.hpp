#pragma once

#include <vector>

#include "cgf/geometry.hpp"
#include "cgf/kdtree.hpp"

namespace cgf {

// Right-handed orthonormal local reference frame at a point.
struct Frame {
  Vec3 x = Vec3::UnitX();
  Vec3 y = Vec3::UnitY();
  Vec3 z = Vec3::UnitZ();

  Mat3 matrix() const {
    Mat3 m;
    m.col(0) = x;
    m.col(1) = y;
    m.col(2) = z;
    return m;
  }

  // Coordinates of a world-frame offset expressed in this frame.
  Vec3 to_local(const Vec3& offset) const {
    return Vec3(x.dot(offset), y.dot(offset), z.dot(offset));
  }
};

// Numerical margins behind the sign and axis choices, exposed so callers can
// reject frames that sit on a decision boundary.
struct FrameDiagnostics {
  double eigen_gap_01 = 0.0;   // gap between eigenvalues 0 and 1, relative to the largest
  double eigen_gap_12 = 0.0;   // gap between eigenvalues 1 and 2
  int x_count_margin = 0;      // |#non-negative - #negative| projections on x
  int z_count_margin = 0;
  int x_near_plane = 0;        // neighbors with |projection| <= 1e-6 * lrf_radius
  int z_near_plane = 0;
  double normal_dot = 0.0;     // <n, z> after sign disambiguation, before the flip
  bool x_tie_break = false;    // projection-count tie resolved by the farthest point
  bool z_tie_break = false;
  bool flipped = false;        // <n, z> < 0 negated x and z
};

// Unit normal at cloud.points[index] from the covariance of neighbors within
// `radius`. Oriented toward the cloud viewpoint when present, otherwise away
// from the neighborhood centroid.
Vec3 estimate_normal(const PointCloud& cloud, const KdTree& tree,
                     std::size_t index, double radius);

// Weighted-covariance frame at cloud.points[index] over the closed ball of
// `radius`, disambiguated so that most neighbors have non-negative
// projections on x and z; if the normal then points against z, x and z are
// negated (y follows as z cross x so the frame stays right-handed).
Frame estimate_frame(const PointCloud& cloud, const KdTree& tree,
                     std::size_t index, double radius, const Vec3& normal,
                     FrameDiagnostics* diagnostics = nullptr);

// Normals for every point with the given neighborhood radius.
std::vector<Vec3> estimate_normals(const PointCloud& cloud, const KdTree& tree,
                                   double radius, unsigned threads = 0);

}  // namespace cgf
