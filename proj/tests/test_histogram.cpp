#include <doctest.h>

#include <cmath>
#include <functional>
#include <random>

#include "cgf/dataset.hpp"
#include "cgf/error.hpp"
#include "cgf/histogram.hpp"
#include "oracles.hpp"
#include "temp_dir.hpp"

using cgf::ErrorCode;
using cgf::Frame;
using cgf::HistogramConfig;
using cgf::KdTree;
using cgf::PointCloud;
using cgf::Vec3;

namespace {

HistogramConfig tiny_config() {
  HistogramConfig config;
  config.radial_bins = 2;
  config.elevation_bins = 2;
  config.azimuth_bins = 2;
  config.radius = 1.0;
  config.min_radius = 0.25;
  return config;
}

cgf::ErrorCode code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const cgf::Error& e) {
    return e.code();
  }
  return cgf::ErrorCode::Ok;
}

}  // namespace

TEST_SUITE("histogram") {

TEST_CASE("radial ladder endpoints are exact and spacing is logarithmic") {
  HistogramConfig config;
  config.radius = 1.2;
  config.min_radius = 0.1;
  config.radial_bins = 17;
  auto t = cgf::radial_thresholds(config);
  REQUIRE(t.size() == 18);
  CHECK(t.front() == 0.1);
  CHECK(t.back() == 1.2);
  double log_min = std::log(0.1);
  double log_ratio = std::log(12.0);
  for (int i = 0; i <= 17; ++i) {
    double expected = std::exp(log_min + (i / 17.0) * log_ratio);
    CHECK(t[static_cast<std::size_t>(i)] ==
          doctest::Approx(expected).epsilon(1e-12));
  }
  CHECK(std::is_sorted(t.begin(), t.end()));
}

TEST_CASE("two log bins between 1 and 4 split at 2") {
  HistogramConfig config;
  config.radial_bins = 2;
  config.elevation_bins = 1;
  config.azimuth_bins = 1;
  config.radius = 4.0;
  config.min_radius = 1.0;
  auto t = cgf::radial_thresholds(config);
  REQUIRE(t.size() == 3);
  CHECK(t[0] == 1.0);
  CHECK(t[1] == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(t[2] == 4.0);
}

TEST_CASE("default layout has 2244 bins") {
  HistogramConfig config;
  config.radius = 1.2;
  config.min_radius = 0.1;
  CHECK(config.radial_bins == 17);
  CHECK(config.elevation_bins == 11);
  CHECK(config.azimuth_bins == 12);
  CHECK(config.bin_count() == 2244);
}

TEST_CASE("ladder and config failure modes") {
  HistogramConfig config = tiny_config();
  config.radius = 0.0;
  CHECK(code_of([&] { cgf::radial_thresholds(config); }) ==
        ErrorCode::InvalidRadius);
  config = tiny_config();
  config.min_radius = 0.0;
  CHECK(code_of([&] { cgf::radial_thresholds(config); }) ==
        ErrorCode::InvalidRadius);
  config = tiny_config();
  config.min_radius = 1.0;  // equal to the support radius
  CHECK(code_of([&] { cgf::radial_thresholds(config); }) ==
        ErrorCode::InvalidRadius);
  config = tiny_config();
  config.radial_bins = 0;
  CHECK(code_of([&] { cgf::radial_thresholds(config); }) ==
        ErrorCode::InvalidArgument);

  // So many bins over so thin a shell that adjacent thresholds collide in
  // floating point.
  config = tiny_config();
  config.radial_bins = 1000;
  config.min_radius = 1.0;
  config.radius = 1.0 + 1e-13;
  CHECK(code_of([&] { cgf::radial_thresholds(config); }) ==
        ErrorCode::InvalidRadius);
}

TEST_CASE("hand-checked bin indices") {
  HistogramConfig config = tiny_config();  // thresholds 0.25, 0.5, 1

  // d = 0.5 sits on the second radial threshold (closed below), on the
  // elevation boundary at pi/2 (second bin), at azimuth 0: flat index
  // 1*2*2 + 1*2 + 0.
  CHECK(cgf::bin_index(config, Vec3(0.5, 0, 0)) == 6);

  CHECK(cgf::bin_index(config, Vec3(1.1, 0, 0)) == cgf::kOutside);
  CHECK(cgf::bin_index(config, Vec3(0, 0, 0)) == 0);

  // Inside r_min still lands in radial bin 0.
  CHECK(cgf::bin_index(config, Vec3(0.1, 0, 0)) == 2);

  // Exactly at the support radius: last radial bin, pole-down elevation.
  CHECK(cgf::bin_index(config, Vec3(0, 0, -1.0)) == 1 * 4 + 1 * 2 + 0);

  // On the +z pole axis azimuth defaults to bin 0.
  CHECK(cgf::bin_index(config, Vec3(0, 0, 0.3)) == 0);

  // Just below a full turn stays in the last azimuth bin.
  double a = 2.0 * M_PI - 1e-9;
  CHECK(cgf::bin_index(config, 0.3 * Vec3(std::cos(a), std::sin(a), 0)) ==
        0 * 4 + 1 * 2 + 1);

  // Negative y half-space maps to the upper azimuth range.
  CHECK(cgf::bin_index(config, Vec3(0.3, -0.1, 0)) == 0 * 4 + 1 * 2 + 1);
}

TEST_CASE("bin indices agree with the direct-formula classifier") {
  HistogramConfig config;
  config.radial_bins = 5;
  config.elevation_bins = 4;
  config.azimuth_bins = 7;
  config.radius = 1.3;
  config.min_radius = 0.07;

  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> u(-1.5, 1.5);
  std::size_t outside = 0, inside = 0;
  for (int k = 0; k < 100000; ++k) {
    Vec3 v(u(rng), u(rng), u(rng));
    int got = cgf::bin_index(config, v);
    int want = oracle::bin_index(config.radial_bins, config.elevation_bins,
                                 config.azimuth_bins, config.radius,
                                 config.min_radius, v);
    REQUIRE(got == want);
    if (got == cgf::kOutside)
      ++outside;
    else
      ++inside;
  }
  CHECK(outside > 1000);  // the sample actually exercises both outcomes
  CHECK(inside > 1000);
  CHECK(cgf::bin_index(config, Vec3(0, 0, 0)) == 0);
}

TEST_CASE("single neighbor gives a unit spike") {
  PointCloud cloud;
  cloud.points = {Vec3(0, 0, 0), Vec3(0.5, 0, 0)};
  KdTree tree(cloud.points);
  auto values = cgf::compute_histogram(cloud, tree, 0, Frame{}, tiny_config());
  REQUIRE(values.size() == 8);
  CHECK(values[6] == 1.0);
  for (std::size_t b = 0; b < values.size(); ++b)
    if (b != 6) CHECK(values[b] == 0.0);
}

TEST_CASE("neighbors sharing a bin concentrate the mass") {
  PointCloud cloud;
  cloud.points = {Vec3(0, 0, 0), Vec3(0.55, 0.1, -0.05), Vec3(0.6, 0.11, -0.05),
                  Vec3(0.7, 0.12, -0.06)};
  KdTree tree(cloud.points);
  HistogramConfig config = tiny_config();
  int shared = cgf::bin_index(config, cloud.points[1]);
  for (std::size_t k = 2; k < cloud.size(); ++k)
    REQUIRE(cgf::bin_index(config, cloud.points[k]) == shared);
  auto values = cgf::compute_histogram(cloud, tree, 0, Frame{}, config);
  CHECK(values[static_cast<std::size_t>(shared)] == 1.0);
}

TEST_CASE("histograms match the per-neighbor oracle exactly") {
  cgf::PointCloud cloud = oracle::random_cloud(500, 91, 0.8);
  KdTree tree(cloud.points);
  HistogramConfig config;
  config.radial_bins = 4;
  config.elevation_bins = 3;
  config.azimuth_bins = 5;
  config.radius = 0.5;
  config.min_radius = 0.05;

  std::mt19937_64 rng(92);
  std::uniform_real_distribution<double> u(-1, 1);
  for (std::size_t index : {0ul, 17ul, 123ul, 499ul}) {
    Frame frame;  // exercise non-identity frames too
    Vec3 axis(u(rng), u(rng), u(rng));
    frame.z = axis.normalized();
    frame.x = frame.z.unitOrthogonal();
    frame.y = frame.z.cross(frame.x);
    auto got = cgf::compute_histogram(cloud, tree, index, frame, config);
    auto want = oracle::histogram(cloud, index, frame, config);
    REQUIRE(got.size() == want.size());
    for (std::size_t b = 0; b < got.size(); ++b) CHECK(got[b] == want[b]);

    double sum = 0.0;
    for (double v : got) sum += v;
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("empty neighborhoods yield an all-zero histogram") {
  PointCloud cloud;
  cloud.points = {Vec3(0, 0, 0), Vec3(5, 0, 0)};
  KdTree tree(cloud.points);
  auto values = cgf::compute_histogram(cloud, tree, 0, Frame{}, tiny_config());
  for (double v : values) CHECK(v == 0.0);

  CHECK(code_of([&] {
          cgf::compute_histogram(cloud, tree, 2, Frame{}, tiny_config());
        }) == ErrorCode::InvalidArgument);
}

TEST_CASE("featurize covers every point and flags degenerate ones") {
  PointCloud plane;
  for (int i = 0; i < 24; ++i)
    for (int j = 0; j < 24; ++j) plane.points.emplace_back(0.02 * i, 0.02 * j, 0.0);
  plane.normals.assign(plane.size(), Vec3(0, 0, 1));
  plane.points.emplace_back(10, 10, 10);  // isolated: no frame support
  plane.normals.emplace_back(0, 0, 1);

  HistogramConfig config;
  config.radial_bins = 3;
  config.elevation_bins = 2;
  config.azimuth_bins = 4;
  config.radius = 0.06;
  config.min_radius = 0.01;
  config.lrf_radius = 0.05;

  cgf::FeaturizedCloud features = cgf::featurize(plane, config);
  CHECK(features.size() == plane.size());
  CHECK(features.valid_count() == plane.size() - 1);
  CHECK(features.valid.back() == 0);
  CHECK(features.values.row(features.values.rows() - 1).cwiseAbs().maxCoeff() ==
        0.0);
  CHECK(features.values.cols() == config.bin_count());

  std::size_t center = 12 * 24 + 12;
  CHECK(features.valid[center] == 1);
  CHECK(features.values.row(static_cast<Eigen::Index>(center)).sum() ==
        doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("featurize without provided normals estimates them") {
  PointCloud sphere = cgf::sample_surface(cgf::Surface::Sphere, 900, 4);
  sphere.normals.clear();
  HistogramConfig config;
  config.radial_bins = 3;
  config.elevation_bins = 3;
  config.azimuth_bins = 4;
  config.radius = 0.35;
  config.min_radius = 0.05;
  config.lrf_radius = 0.2;
  cgf::FeaturizedCloud features = cgf::featurize(sphere, config);
  CHECK(features.valid_count() == sphere.size());
}

TEST_CASE("featurize is deterministic across thread counts") {
  PointCloud cloud = cgf::sample_surface(cgf::Surface::Torus, 700, 8);
  HistogramConfig config;
  config.radial_bins = 3;
  config.elevation_bins = 2;
  config.azimuth_bins = 4;
  config.radius = 0.5;
  config.min_radius = 0.08;
  config.lrf_radius = 0.3;

  config.threads = 1;
  cgf::FeaturizedCloud one = cgf::featurize(cloud, config);
  for (unsigned threads : {0u, 3u}) {
    config.threads = threads;
    cgf::FeaturizedCloud other = cgf::featurize(cloud, config);
    CHECK(other.valid == one.valid);
    CHECK((other.values - one.values).cwiseAbs().maxCoeff() == 0.0);
  }
}

TEST_CASE("featurize failure modes") {
  PointCloud cloud = oracle::random_cloud(30, 3);
  HistogramConfig config = tiny_config();
  CHECK(code_of([&] { cgf::featurize(cloud, config); }) ==
        ErrorCode::InvalidRadius);  // lrf_radius unset

  config.lrf_radius = 0.5;
  config.radius = -1.0;
  CHECK(code_of([&] { cgf::featurize(cloud, config); }) ==
        ErrorCode::InvalidRadius);

  config = tiny_config();
  config.lrf_radius = 0.5;
  cloud.normals.assign(3, Vec3(0, 0, 1));  // wrong count
  CHECK(code_of([&] { cgf::featurize(cloud, config); }) == ErrorCode::Shape);
}

TEST_CASE("histograms of boundary-clear stable points survive rigid motion") {
  PointCloud torus = cgf::sample_surface(cgf::Surface::Torus, 700, 15);
  KdTree tree(torus.points);
  HistogramConfig config;
  config.radial_bins = 3;
  config.elevation_bins = 3;
  config.azimuth_bins = 4;
  config.radius = 0.45;
  config.min_radius = 0.07;
  config.lrf_radius = 0.3;

  struct Eligible {
    std::size_t index;
    std::vector<double> values;
  };
  std::vector<Eligible> eligible;
  for (std::size_t i = 0; i < torus.size() && eligible.size() < 25; i += 7) {
    cgf::FrameDiagnostics diag;
    Frame frame;
    try {
      frame = cgf::estimate_frame(torus, tree, i, config.lrf_radius,
                                  torus.normals[i], &diag);
    } catch (const cgf::Error&) {
      continue;
    }
    if (!oracle::frame_is_stable(diag)) continue;
    if (!oracle::neighbors_clear_of_boundaries(torus, i, frame, config, 1e-6))
      continue;
    eligible.push_back({i, cgf::compute_histogram(torus, tree, i, frame, config)});
  }
  REQUIRE(eligible.size() >= 10);

  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    cgf::RigidTransform t = cgf::random_rigid_transform(seed, 1.0);
    PointCloud moved = torus.transformed(t);
    KdTree moved_tree(moved.points);
    for (const auto& e : eligible) {
      Frame frame = cgf::estimate_frame(moved, moved_tree, e.index,
                                        config.lrf_radius, moved.normals[e.index]);
      auto values =
          cgf::compute_histogram(moved, moved_tree, e.index, frame, config);
      CHECK(values == e.values);
    }
  }
}

TEST_CASE("histogram files round trip bitwise") {
  TempDir dir;
  PointCloud cloud = cgf::sample_surface(cgf::Surface::Sphere, 300, 21);
  HistogramConfig config;
  config.radial_bins = 3;
  config.elevation_bins = 2;
  config.azimuth_bins = 3;
  config.radius = 0.4;
  config.min_radius = 0.06;
  config.lrf_radius = 0.25;
  cgf::FeaturizedCloud features = cgf::featurize(cloud, config);

  auto path = dir.file("features.cgfh");
  cgf::write_histograms(features, path);
  cgf::FeaturizedCloud back = cgf::read_histograms(path);
  CHECK(back.config.radial_bins == config.radial_bins);
  CHECK(back.config.elevation_bins == config.elevation_bins);
  CHECK(back.config.azimuth_bins == config.azimuth_bins);
  CHECK(back.config.radius == config.radius);
  CHECK(back.config.min_radius == config.min_radius);
  CHECK(back.valid == features.valid);
  REQUIRE(back.values.rows() == features.values.rows());
  CHECK((back.values - features.values).cwiseAbs().maxCoeff() == 0.0);

  auto again = dir.file("features2.cgfh");
  cgf::write_histograms(back, again);
  CHECK(read_text(path) == read_text(again));
}

TEST_CASE("histogram files tolerate comments") {
  TempDir dir;
  auto path = dir.file("commented.cgfh");
  write_text(path,
             "# produced by hand\n"
             "CGFH 1 1 1 1 0.5 2\n"
             "1 0.25  # a row comment\n"
             "\n"
             "0 0\n");
  cgf::FeaturizedCloud features = cgf::read_histograms(path);
  REQUIRE(features.size() == 2);
  CHECK(features.valid[0] == 1);
  CHECK(features.valid[1] == 0);
  CHECK(features.values(0, 0) == 0.25);
}

TEST_CASE("histogram file failure modes") {
  TempDir dir;
  auto path = dir.file("bad.cgfh");
  auto read_code = [&] { return code_of([&] { cgf::read_histograms(path); }); };

  CHECK(code_of([&] { cgf::read_histograms(dir.file("ghost.cgfh")); }) ==
        ErrorCode::Io);

  write_text(path, "");
  CHECK(read_code() == ErrorCode::Parse);

  write_text(path, "XGFH 1 1 1 1 0.5 1\n1 0\n");
  CHECK(read_code() == ErrorCode::Parse);

  write_text(path, "CGFH 1 1 1\n");
  CHECK(read_code() == ErrorCode::Parse);

  write_text(path, "CGFH 1 1 1 0.5 1 1\n1 0\n");  // r_min above r
  CHECK(read_code() == ErrorCode::InvalidRadius);

  write_text(path, "CGFH 1 1 1 1 0.5 3\n1 0\n0 0\n");  // short file
  CHECK(read_code() == ErrorCode::Parse);

  write_text(path, "CGFH 1 1 1 1 0.5 1\n2 0\n");  // flag out of range
  CHECK(read_code() == ErrorCode::Parse);

  write_text(path, "CGFH 1 1 1 1 0.5 1\n1\n");  // short row
  CHECK(read_code() == ErrorCode::Parse);

  write_text(path, "CGFH 1 1 1 1 0.5 1\n1 0 0\n");  // excess fields
  CHECK(read_code() == ErrorCode::Parse);
}

}  // TEST_SUITE
