#include <doctest.h>

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "cgf/error.hpp"
#include "cgf/kdtree.hpp"
#include "cgf/lrf.hpp"
#include "oracles.hpp"

using cgf::ErrorCode;
using cgf::Frame;
using cgf::FrameDiagnostics;
using cgf::KdTree;
using cgf::Mat3;
using cgf::PointCloud;
using cgf::Vec3;

namespace {

PointCloud fibonacci_sphere(std::size_t n, double radius = 1.0) {
  PointCloud cloud;
  cloud.points.reserve(n);
  const double golden = M_PI * (3.0 - std::sqrt(5.0));
  for (std::size_t k = 0; k < n; ++k) {
    double z = 1.0 - 2.0 * (static_cast<double>(k) + 0.5) / static_cast<double>(n);
    double r = std::sqrt(std::max(0.0, 1.0 - z * z));
    double phi = static_cast<double>(k) * golden;
    cloud.points.emplace_back(radius * r * std::cos(phi),
                              radius * r * std::sin(phi), radius * z);
  }
  return cloud;
}

// Lopsided curved blob: dense enough for a frame, asymmetric enough that no
// sign choice sits near a decision boundary.
PointCloud skew_patch(std::uint64_t seed, std::size_t n = 120) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  PointCloud cloud;
  cloud.points.emplace_back(0, 0, 0);  // query point at a corner of the mass
  for (std::size_t k = 1; k < n; ++k) {
    double x = u(rng);
    double y = 0.6 * u(rng) - 0.1;
    double z = 0.25 * u(rng) - 0.05 + 0.3 * x * x;
    cloud.points.emplace_back(x, y, z);
  }
  return cloud;
}

// The weighted scatter of support offsets straight from its definition.
Mat3 weighted_scatter(const PointCloud& cloud, std::size_t index,
                      double radius) {
  const Vec3& p = cloud.points[index];
  Mat3 m = Mat3::Zero();
  double weight_sum = 0.0;
  for (std::size_t k = 0; k < cloud.size(); ++k) {
    Vec3 o = cloud.points[k] - p;
    double d = o.norm();
    if (d > radius) continue;
    m += (radius - d) * (o * o.transpose());
    weight_sum += radius - d;
  }
  return m / weight_sum;
}

bool is_orthonormal_frame(const Frame& f, double tol) {
  return std::abs(f.x.norm() - 1.0) < tol && std::abs(f.y.norm() - 1.0) < tol &&
         std::abs(f.z.norm() - 1.0) < tol && std::abs(f.x.dot(f.y)) < tol &&
         std::abs(f.x.dot(f.z)) < tol && std::abs(f.y.dot(f.z)) < tol &&
         std::abs(f.x.cross(f.y).dot(f.z) - 1.0) < tol;
}

}  // namespace

TEST_SUITE("lrf") {

TEST_CASE("plane normal points at the viewpoint") {
  PointCloud plane;
  for (int i = -10; i <= 10; ++i)
    for (int j = -10; j <= 10; ++j)
      plane.points.emplace_back(0.1 * i, 0.1 * j, 0.0);
  plane.viewpoint = Vec3(0, 0, 5);
  KdTree tree(plane.points);
  std::size_t center = 10 * 21 + 10;
  REQUIRE(plane.points[center] == Vec3(0, 0, 0));

  Vec3 n = cgf::estimate_normal(plane, tree, center, 0.35);
  CHECK((n - Vec3(0, 0, 1)).norm() < 1e-6);

  plane.viewpoint = Vec3(0, 0, -5);
  n = cgf::estimate_normal(plane, tree, center, 0.35);
  CHECK((n - Vec3(0, 0, -1)).norm() < 1e-6);
}

TEST_CASE("sphere normals are radial and outward") {
  PointCloud sphere = fibonacci_sphere(4000);
  KdTree tree(sphere.points);
  for (std::size_t index : {0ul, 700ul, 1600ul, 2500ul, 3999ul}) {
    Vec3 n = cgf::estimate_normal(sphere, tree, index, 0.25);
    Vec3 radial = sphere.points[index].normalized();
    CHECK((n - radial).norm() < 1e-2);  // oriented away from the centroid
  }
}

TEST_CASE("normal estimation failure modes") {
  PointCloud pair;
  pair.points = {Vec3(0, 0, 0), Vec3(1, 0, 0)};
  KdTree pair_tree(pair.points);
  try {
    cgf::estimate_normal(pair, pair_tree, 0, 2.0);
    FAIL("expected an exception");
  } catch (const cgf::Error& e) {
    CHECK(e.code() == ErrorCode::DegenerateNeighborhood);
  }

  PointCloud line;
  for (int i = 0; i < 6; ++i) line.points.emplace_back(0.1 * i, 0, 0);
  KdTree line_tree(line.points);
  try {
    cgf::estimate_normal(line, line_tree, 2, 1.0);
    FAIL("expected an exception");
  } catch (const cgf::Error& e) {
    CHECK(e.code() == ErrorCode::DegenerateNeighborhood);
  }

  PointCloud blob = skew_patch(1);
  KdTree blob_tree(blob.points);
  CHECK_THROWS_AS(cgf::estimate_normal(blob, blob_tree, 0, -1.0), cgf::Error);
  CHECK_THROWS_AS(cgf::estimate_normal(blob, blob_tree, 0, 0.0), cgf::Error);
  CHECK_THROWS_AS(cgf::estimate_normal(blob, blob_tree, blob.size(), 1.0),
                  cgf::Error);
}

TEST_CASE("frames are right-handed orthonormal with z along the normal side") {
  for (std::uint64_t seed = 0; seed < 8; ++seed) {
    PointCloud cloud = skew_patch(seed);
    KdTree tree(cloud.points);
    Vec3 normal = cgf::estimate_normal(cloud, tree, 0, 1.6);
    FrameDiagnostics diag;
    Frame frame = cgf::estimate_frame(cloud, tree, 0, 1.6, normal, &diag);
    CHECK(is_orthonormal_frame(frame, 1e-9));
    CHECK(frame.z.dot(normal) >= 0.0);
    CHECK(std::abs(diag.normal_dot) == doctest::Approx(frame.z.dot(normal)));
    CHECK(diag.flipped == (diag.normal_dot < 0.0));
  }
}

TEST_CASE("frame axes match an independent eigen solve of the scatter") {
  PointCloud cloud = skew_patch(3);
  KdTree tree(cloud.points);
  double radius = 1.6;
  Vec3 normal = cgf::estimate_normal(cloud, tree, 0, radius);
  Frame frame = cgf::estimate_frame(cloud, tree, 0, radius, normal);

  Eigen::SelfAdjointEigenSolver<Mat3> solver(weighted_scatter(cloud, 0, radius));
  REQUIRE(solver.info() == Eigen::Success);
  Vec3 largest = solver.eigenvectors().col(2);
  Vec3 smallest = solver.eigenvectors().col(0);
  CHECK(std::abs(frame.x.dot(largest)) == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(std::abs(frame.z.dot(smallest)) == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("negating the normal flips x and z but not y") {
  PointCloud cloud = skew_patch(5);
  KdTree tree(cloud.points);
  Vec3 normal = cgf::estimate_normal(cloud, tree, 0, 1.6);
  FrameDiagnostics diag_a, diag_b;
  Frame a = cgf::estimate_frame(cloud, tree, 0, 1.6, normal, &diag_a);
  Frame b = cgf::estimate_frame(cloud, tree, 0, 1.6, -normal, &diag_b);
  CHECK((a.x + b.x).norm() == 0.0);
  CHECK((a.z + b.z).norm() == 0.0);
  CHECK((a.y - b.y).norm() == 0.0);
  CHECK(diag_a.flipped != diag_b.flipped);
  CHECK(diag_a.normal_dot == -diag_b.normal_dot);
}

TEST_CASE("stable frames move rigidly with the cloud") {
  PointCloud cloud = skew_patch(7);
  KdTree tree(cloud.points);
  double radius = 1.6;
  Vec3 normal = cgf::estimate_normal(cloud, tree, 0, radius);
  FrameDiagnostics diag;
  Frame frame = cgf::estimate_frame(cloud, tree, 0, radius, normal, &diag);
  REQUIRE(oracle::frame_is_stable(diag));

  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    cgf::RigidTransform t = cgf::random_rigid_transform(seed, 2.0);
    PointCloud moved = cloud.transformed(t);
    KdTree moved_tree(moved.points);
    FrameDiagnostics moved_diag;
    Frame moved_frame = cgf::estimate_frame(
        moved, moved_tree, 0, radius, t.apply_direction(normal), &moved_diag);
    CHECK((moved_frame.x - t.apply_direction(frame.x)).norm() < 1e-6);
    CHECK((moved_frame.y - t.apply_direction(frame.y)).norm() < 1e-6);
    CHECK((moved_frame.z - t.apply_direction(frame.z)).norm() < 1e-6);
    CHECK(moved_diag.flipped == diag.flipped);
  }
}

TEST_CASE("frames ignore point order") {
  PointCloud cloud = skew_patch(11);
  KdTree tree(cloud.points);
  Vec3 normal = cgf::estimate_normal(cloud, tree, 0, 1.6);
  Frame frame = cgf::estimate_frame(cloud, tree, 0, 1.6, normal);

  std::vector<std::size_t> perm(cloud.size());
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  std::mt19937_64 rng(99);
  std::shuffle(perm.begin() + 1, perm.end(), rng);  // keep the query at 0
  PointCloud shuffled;
  shuffled.points.reserve(cloud.size());
  for (std::size_t k : perm) shuffled.points.push_back(cloud.points[k]);
  KdTree shuffled_tree(shuffled.points);
  Frame again = cgf::estimate_frame(shuffled, shuffled_tree, 0, 1.6, normal);
  CHECK((frame.x - again.x).norm() < 1e-9);
  CHECK((frame.y - again.y).norm() < 1e-9);
  CHECK((frame.z - again.z).norm() < 1e-9);
}

TEST_CASE("frame estimation failure modes") {
  PointCloud tiny;
  tiny.points = {Vec3(0, 0, 0), Vec3(0.1, 0, 0), Vec3(0, 0.1, 0),
                 Vec3(0, 0, 0.1)};
  KdTree tiny_tree(tiny.points);
  try {
    cgf::estimate_frame(tiny, tiny_tree, 0, 1.0, Vec3(0, 0, 1));
    FAIL("expected an exception");
  } catch (const cgf::Error& e) {
    CHECK(e.code() == ErrorCode::DegenerateNeighborhood);
  }

  PointCloud line;
  for (int i = 0; i < 8; ++i) line.points.emplace_back(0.05 * i, 0, 0);
  KdTree line_tree(line.points);
  try {
    cgf::estimate_frame(line, line_tree, 0, 1.0, Vec3(0, 0, 1));
    FAIL("expected an exception");
  } catch (const cgf::Error& e) {
    CHECK(e.code() == ErrorCode::DegenerateNeighborhood);
  }

  PointCloud cloud = skew_patch(13);
  KdTree tree(cloud.points);
  CHECK_THROWS_AS(cgf::estimate_frame(cloud, tree, 0, 0.0, Vec3(0, 0, 1)),
                  cgf::Error);
  CHECK_THROWS_AS(
      cgf::estimate_frame(cloud, tree, cloud.size(), 1.0, Vec3(0, 0, 1)),
      cgf::Error);
}

TEST_CASE("batch normal estimation matches per-point calls on every thread count") {
  PointCloud sphere = fibonacci_sphere(600);
  KdTree tree(sphere.points);
  auto single = cgf::estimate_normals(sphere, tree, 0.4, 1);
  REQUIRE(single.size() == sphere.size());
  for (std::size_t i = 0; i < sphere.size(); i += 37)
    CHECK((single[i] - cgf::estimate_normal(sphere, tree, i, 0.4)).norm() ==
          0.0);
  for (unsigned threads : {0u, 3u}) {
    auto multi = cgf::estimate_normals(sphere, tree, 0.4, threads);
    for (std::size_t i = 0; i < sphere.size(); ++i)
      CHECK((multi[i] - single[i]).norm() == 0.0);
  }
}

}  // TEST_SUITE
