#include "cgf/lrf.hpp"

#include <algorithm>
#include <array>
#include <cmath>

#include "cgf/util.hpp"

namespace cgf {
namespace {

// Eigenvalues ascending, eigenvectors as matching columns. Closed-form
// characteristic-polynomial solve; cyclic Jacobi rotations when eigenvalues
// come out closer than 1e-12 relative, for orthogonality under near-ties.
struct EigenDecomposition3 {
  Eigen::Vector3d values;
  Mat3 vectors;
};

EigenDecomposition3 jacobi_eigen3(const Mat3& m) {
  Mat3 a = m;
  Mat3 v = Mat3::Identity();
  for (int sweep = 0; sweep < 50; ++sweep) {
    double off = 0.0;
    for (int p = 0; p < 3; ++p)
      for (int q = p + 1; q < 3; ++q) off += a(p, q) * a(p, q);
    if (off <= 1e-300) break;
    for (int p = 0; p < 3; ++p) {
      for (int q = p + 1; q < 3; ++q) {
        if (a(p, q) == 0.0) continue;
        double theta = (a(q, q) - a(p, p)) / (2.0 * a(p, q));
        double t = (theta >= 0.0 ? 1.0 : -1.0) /
                   (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        double c = 1.0 / std::sqrt(t * t + 1.0);
        double s = t * c;
        Mat3 rot = Mat3::Identity();
        rot(p, p) = c;
        rot(q, q) = c;
        rot(p, q) = s;
        rot(q, p) = -s;
        a = rot.transpose() * a * rot;
        v = v * rot;
      }
    }
  }
  EigenDecomposition3 out;
  std::array<int, 3> idx = {0, 1, 2};
  Eigen::Vector3d diag = a.diagonal();
  std::sort(idx.begin(), idx.end(),
            [&](int i, int j) { return diag[i] < diag[j]; });
  for (int k = 0; k < 3; ++k) {
    out.values[k] = diag[idx[static_cast<std::size_t>(k)]];
    out.vectors.col(k) = v.col(idx[static_cast<std::size_t>(k)]);
  }
  return out;
}

EigenDecomposition3 closed_form_eigen3(const Mat3& m) {
  // Eigenvalues via the trigonometric solution of the characteristic
  // polynomial of the shifted, scaled matrix.
  double q = m.trace() / 3.0;
  Mat3 b = m - q * Mat3::Identity();
  double p2 = (b * b).trace() / 6.0;
  EigenDecomposition3 out;
  if (p2 <= 0.0) {  // already diagonal with equal entries
    out.values.setConstant(q);
    out.vectors = Mat3::Identity();
    return out;
  }
  double p = std::sqrt(p2);
  double det = (b / p).determinant() / 2.0;
  det = std::clamp(det, -1.0, 1.0);
  double phi = std::acos(det) / 3.0;
  double e2 = q + 2.0 * p * std::cos(phi);
  double e0 = q + 2.0 * p * std::cos(phi + 2.0 * M_PI / 3.0);
  double e1 = 3.0 * q - e0 - e2;
  out.values << e0, e1, e2;
  // Eigenvector for each value from the cross product of two rows of
  // (m - lambda I); pick the largest cross product for stability.
  for (int k = 0; k < 3; ++k) {
    Mat3 c = m - out.values[k] * Mat3::Identity();
    Vec3 r0 = c.row(0), r1 = c.row(1), r2 = c.row(2);
    Vec3 c01 = r0.cross(r1), c02 = r0.cross(r2), c12 = r1.cross(r2);
    double n01 = c01.squaredNorm(), n02 = c02.squaredNorm(),
           n12 = c12.squaredNorm();
    Vec3 best = c01;
    double best_norm = n01;
    if (n02 > best_norm) {
      best = c02;
      best_norm = n02;
    }
    if (n12 > best_norm) {
      best = c12;
      best_norm = n12;
    }
    if (best_norm <= 0.0) {
      out.vectors.col(k) = Vec3::Unit(k);
    } else {
      out.vectors.col(k) = best / std::sqrt(best_norm);
    }
  }
  return out;
}

EigenDecomposition3 eigen3(const Mat3& m) {
  EigenDecomposition3 direct = closed_form_eigen3(m);
  double scale = std::max({std::abs(direct.values[0]), std::abs(direct.values[1]),
                           std::abs(direct.values[2]), 1e-300});
  double gap01 = std::abs(direct.values[1] - direct.values[0]);
  double gap12 = std::abs(direct.values[2] - direct.values[1]);
  if (gap01 <= 1e-12 * scale || gap12 <= 1e-12 * scale) return jacobi_eigen3(m);
  return direct;
}

Vec3 cloud_centroid(const PointCloud& cloud) {
  Vec3 sum = Vec3::Zero();
  for (const auto& p : cloud.points) sum += p;
  return sum / static_cast<double>(cloud.size());
}

// Orients `axis` so that most neighbor offsets project non-negatively onto
// it. Exact count ties fall back to the projection sign of the farthest
// neighbor (distance ties toward the lower index).
Vec3 disambiguate_axis(const Vec3& axis, const std::vector<Vec3>& offsets,
                       const std::vector<double>& dists, double near_plane_tol,
                       int* count_margin, int* near_plane, bool* tie_break) {
  int pos = 0, neg = 0, near = 0;
  for (const auto& o : offsets) {
    double proj = o.dot(axis);
    if (proj >= 0.0)
      ++pos;
    else
      ++neg;
    if (std::abs(proj) <= near_plane_tol) ++near;
  }
  *count_margin = std::abs(pos - neg);
  *near_plane = near;
  *tie_break = false;
  if (pos > neg) return axis;
  if (neg > pos) return -axis;
  *tie_break = true;
  std::size_t farthest = 0;
  for (std::size_t k = 1; k < offsets.size(); ++k)
    if (dists[k] > dists[farthest]) farthest = k;
  return offsets[farthest].dot(axis) < 0.0 ? -axis : axis;
}

}  // namespace

Vec3 estimate_normal(const PointCloud& cloud, const KdTree& tree,
                     std::size_t index, double radius) {
  require(radius > 0.0, ErrorCode::InvalidRadius,
          "normal estimation radius must be positive");
  require(index < cloud.size(), ErrorCode::InvalidArgument,
          "point index out of range");
  const Vec3& p = cloud.points[index];
  auto ids = tree.radius(p, radius);
  require(ids.size() >= 3, ErrorCode::DegenerateNeighborhood,
          "normal estimation needs at least 3 points in the support");
  Vec3 centroid = Vec3::Zero();
  for (auto id : ids) centroid += cloud.points[id];
  centroid /= static_cast<double>(ids.size());
  Mat3 cov = Mat3::Zero();
  for (auto id : ids) {
    Vec3 d = cloud.points[id] - centroid;
    cov += d * d.transpose();
  }
  auto eig = eigen3(cov);
  require(eig.values[2] > 0.0 && eig.values[1] > 1e-12 * eig.values[2],
          ErrorCode::DegenerateNeighborhood,
          "neighborhood is collinear; normal undefined");
  Vec3 n = eig.vectors.col(0).normalized();
  Vec3 toward = cloud.viewpoint ? (*cloud.viewpoint - p) : (p - cloud_centroid(cloud));
  if (n.dot(toward) < 0.0) n = -n;
  return n;
}

Frame estimate_frame(const PointCloud& cloud, const KdTree& tree,
                     std::size_t index, double radius, const Vec3& normal,
                     FrameDiagnostics* diagnostics) {
  require(radius > 0.0, ErrorCode::InvalidRadius,
          "frame estimation radius must be positive");
  require(index < cloud.size(), ErrorCode::InvalidArgument,
          "point index out of range");
  const Vec3& p = cloud.points[index];
  auto ids = tree.radius(p, radius);
  require(ids.size() >= 5, ErrorCode::DegenerateNeighborhood,
          "frame estimation needs at least 5 points in the support");

  std::vector<Vec3> offsets;
  std::vector<double> dists;
  offsets.reserve(ids.size());
  dists.reserve(ids.size());
  Mat3 m = Mat3::Zero();
  double weight_sum = 0.0;
  for (auto id : ids) {
    Vec3 o = cloud.points[id] - p;
    double d = o.norm();
    double w = radius - d;
    m += w * (o * o.transpose());
    weight_sum += w;
    if (id != index) {
      offsets.push_back(o);
      dists.push_back(d);
    }
  }
  require(weight_sum > 0.0, ErrorCode::DegenerateNeighborhood,
          "all support points lie on the boundary");
  m /= weight_sum;

  auto eig = eigen3(m);
  require(eig.values[2] > 0.0 && eig.values[1] > 1e-12 * eig.values[2],
          ErrorCode::DegenerateNeighborhood,
          "support is collinear; frame undefined");

  FrameDiagnostics local;
  local.eigen_gap_01 = (eig.values[1] - eig.values[0]) / eig.values[2];
  local.eigen_gap_12 = (eig.values[2] - eig.values[1]) / eig.values[2];

  double near_tol = 1e-6 * radius;
  Vec3 x = disambiguate_axis(eig.vectors.col(2).normalized(), offsets, dists,
                             near_tol, &local.x_count_margin,
                             &local.x_near_plane, &local.x_tie_break);
  Vec3 z = disambiguate_axis(eig.vectors.col(0).normalized(), offsets, dists,
                             near_tol, &local.z_count_margin,
                             &local.z_near_plane, &local.z_tie_break);
  local.normal_dot = normal.dot(z);
  if (local.normal_dot < 0.0) {
    x = -x;
    z = -z;
    local.flipped = true;
  }
  Frame frame;
  frame.x = x;
  frame.z = z;
  frame.y = z.cross(x);
  if (diagnostics) *diagnostics = local;
  return frame;
}

std::vector<Vec3> estimate_normals(const PointCloud& cloud, const KdTree& tree,
                                   double radius, unsigned threads) {
  std::vector<Vec3> out(cloud.size());
  parallel_for(cloud.size(), threads, [&](std::size_t i) {
    out[i] = estimate_normal(cloud, tree, i, radius);
  });
  return out;
}

}  // namespace cgf
