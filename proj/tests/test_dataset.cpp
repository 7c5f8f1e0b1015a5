#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <set>

#include "cgf/dataset.hpp"
#include "cgf/error.hpp"
#include "cgf/util.hpp"
#include "oracles.hpp"

using cgf::AlignedSet;
using cgf::ErrorCode;
using cgf::FeaturizedCloud;
using cgf::MiningConfig;
using cgf::PointCloud;
using cgf::RigidTransform;
using cgf::Surface;
using cgf::TripletRef;
using cgf::Vec3;

namespace {

cgf::ErrorCode code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const cgf::Error& e) {
    return e.code();
  }
  return cgf::ErrorCode::Ok;
}

AlignedSet make_set(std::vector<PointCloud> clouds,
                    std::vector<RigidTransform> to_world = {}) {
  AlignedSet set;
  set.clouds = std::move(clouds);
  if (to_world.empty())
    set.to_world.assign(set.clouds.size(), RigidTransform{});
  else
    set.to_world = std::move(to_world);
  for (std::size_t v = 0; v < set.clouds.size(); ++v)
    set.paths.push_back("view" + std::to_string(v) + ".xyz");
  return set;
}

// Feature stand-ins for mining tests: mining reads only row counts and
// validity, so random rows suffice.
std::vector<FeaturizedCloud> fake_features(const AlignedSet& set, int dim = 4) {
  std::vector<FeaturizedCloud> features(set.clouds.size());
  for (std::size_t v = 0; v < set.clouds.size(); ++v) {
    features[v].values = oracle::random_rows(set.clouds[v].size(), dim,
                                             900 + v);
    features[v].valid.assign(set.clouds[v].size(), 1);
  }
  return features;
}

PointCloud line_cloud(std::size_t n, double spacing) {
  PointCloud cloud;
  for (std::size_t k = 0; k < n; ++k)
    cloud.points.emplace_back(spacing * static_cast<double>(k), 0.0, 0.0);
  return cloud;
}

// Ten two-point clusters spaced far apart; `copied` of them also appear in
// the second cloud, the rest of the second cloud sits far away. Both clouds
// then have resolution 0.1 and the overlap fraction is copied/10 exactly.
AlignedSet cluster_overlap_set(int copied) {
  PointCloud a, b;
  for (int c = 0; c < 10; ++c) {
    a.points.emplace_back(10.0 * c, 0.0, 0.0);
    a.points.emplace_back(10.0 * c + 0.1, 0.0, 0.0);
    double y = c < copied ? 0.0 : 1000.0;
    b.points.emplace_back(10.0 * c, y, 0.0);
    b.points.emplace_back(10.0 * c + 0.1, y, 0.0);
  }
  return make_set({a, b});
}

}  // namespace

TEST_SUITE("dataset") {

TEST_CASE("set resolution is the max per-cloud median spacing") {
  PointCloud unit = line_cloud(3, 1.0);    // median nn 1
  PointCloud tight = line_cloud(5, 0.5);   // median nn 0.5
  AlignedSet set = make_set({unit, tight});
  CHECK(cgf::compute_eps(set) == 1.0);

  // The value is cached on the set after the first call.
  set.clouds[0] = line_cloud(3, 7.0);
  CHECK(cgf::compute_eps(set) == 1.0);
}

TEST_CASE("set resolution failure modes") {
  AlignedSet empty;
  CHECK(code_of([&] { cgf::compute_eps(empty); }) ==
        ErrorCode::InvalidArgument);

  PointCloud dupes;
  dupes.points = {Vec3(0, 0, 0), Vec3(0, 0, 0)};
  AlignedSet degenerate = make_set({dupes});
  CHECK(code_of([&] { cgf::compute_eps(degenerate); }) ==
        ErrorCode::DegenerateCloud);
}

TEST_CASE("aligned-set diameter spans all world-frame points") {
  PointCloud a = line_cloud(2, 1.0);  // x in [0, 1]
  PointCloud b = line_cloud(2, 1.0);
  RigidTransform shift;
  shift.translation = Vec3(0, 2, 0);
  AlignedSet set = make_set({a, b}, {RigidTransform{}, shift});
  CHECK(cgf::aligned_set_diameter(set) ==
        doctest::Approx(std::sqrt(5.0)).epsilon(1e-12));
}

TEST_CASE("overlap fraction endpoints") {
  PointCloud cloud = oracle::random_cloud(50, 3);
  RigidTransform identity;
  CHECK(cgf::overlap_fraction(cloud, identity, cloud, identity, 0.05) == 1.0);

  RigidTransform far_away;
  far_away.translation = Vec3(100, 0, 0);
  CHECK(cgf::overlap_fraction(cloud, identity, cloud, far_away, 0.05) == 0.0);

  CHECK(code_of([&] {
          cgf::overlap_fraction(cloud, identity, cloud, identity, 0.0);
        }) == ErrorCode::InvalidArgument);
}

TEST_CASE("a four-in-ten overlap scores 0.4") {
  PointCloud a = line_cloud(10, 1.0);
  PointCloud b = line_cloud(4, 1.0);  // coincides with a's first four points
  CHECK(cgf::overlap_fraction(a, RigidTransform{}, b, RigidTransform{}, 0.1) ==
        0.4);
  // The measure is directional: every b point finds a counterpart in a.
  CHECK(cgf::overlap_fraction(b, RigidTransform{}, a, RigidTransform{}, 0.1) ==
        1.0);
}

TEST_CASE("overlap fraction matches the brute-force oracle exactly") {
  for (std::uint64_t seed = 0; seed < 6; ++seed) {
    PointCloud a = oracle::random_cloud(80, seed * 2 + 1);
    PointCloud b = oracle::random_cloud(60, seed * 2 + 2);
    RigidTransform ta = cgf::random_rigid_transform(seed + 50, 0.5);
    RigidTransform tb = cgf::random_rigid_transform(seed + 70, 0.5);
    for (double eps : {0.05, 0.2, 0.6}) {
      CHECK(cgf::overlap_fraction(a, ta, b, tb, eps) ==
            oracle::overlap_fraction(a, ta, b, tb, eps));
    }
  }
}

TEST_CASE("overlapping pairs are gated on the worse direction") {
  PointCloud cloud = oracle::random_cloud(40, 5);
  AlignedSet twins = make_set({cloud, cloud});
  auto pairs = cgf::find_overlapping_pairs(twins);
  REQUIRE(pairs.size() == 1);
  CHECK(pairs[0].i == 0);
  CHECK(pairs[0].j == 1);
  CHECK(pairs[0].alpha_ij == 1.0);
  CHECK(pairs[0].alpha_ji == 1.0);

  PointCloud far = oracle::random_cloud(40, 6);
  RigidTransform shift;
  shift.translation = Vec3(50, 0, 0);
  AlignedSet trio = make_set({cloud, cloud, far},
                             {RigidTransform{}, RigidTransform{}, shift});
  pairs = cgf::find_overlapping_pairs(trio);
  REQUIRE(pairs.size() == 1);
  CHECK(pairs[0].i == 0);
  CHECK(pairs[0].j == 1);

  AlignedSet lonely = make_set({cloud});
  CHECK(code_of([&] { cgf::find_overlapping_pairs(lonely); }) ==
        ErrorCode::InvalidArgument);
}

TEST_CASE("the default overlap gate admits 0.3 and rejects 0.2") {
  AlignedSet at_gate = cluster_overlap_set(3);
  REQUIRE(cgf::compute_eps(at_gate) == doctest::Approx(0.1));
  auto pairs = cgf::find_overlapping_pairs(at_gate);
  REQUIRE(pairs.size() == 1);
  CHECK(pairs[0].alpha_ij == 0.3);

  AlignedSet below = cluster_overlap_set(2);
  CHECK(cgf::find_overlapping_pairs(below).empty());
}

TEST_CASE("mining config validation") {
  MiningConfig config;
  config.tau = 0.1;
  CHECK_NOTHROW(config.validate());  // defaults: 40 = 15 + 25

  config.tau = 0.0;
  CHECK(code_of([&] { config.validate(); }) == ErrorCode::InvalidArgument);
  config.tau = 0.1;
  config.triplets_per_point = 0;
  CHECK(code_of([&] { config.validate(); }) == ErrorCode::InvalidArgument);
  config = MiningConfig{};
  config.tau = 0.1;
  config.hard_negatives_per_point = -1;
  CHECK(code_of([&] { config.validate(); }) == ErrorCode::InvalidArgument);
  config = MiningConfig{};
  config.tau = 0.1;
  config.hard_negatives_per_point = 10;  // 10 + 25 != 40
  CHECK(code_of([&] { config.validate(); }) == ErrorCode::InvalidArgument);
  config = MiningConfig{};
  config.tau = 0.1;
  config.min_overlap = 1.5;
  CHECK(code_of([&] { config.validate(); }) == ErrorCode::InvalidArgument);
}

TEST_CASE("mining identical views anchors every valid point") {
  PointCloud cloud = oracle::random_cloud(30, 11);
  AlignedSet set = make_set({cloud, cloud});
  auto features = fake_features(set);
  MiningConfig config;
  config.tau = 1e-3;
  config.triplets_per_point = 5;
  config.hard_negatives_per_point = 2;
  config.random_negatives_per_point = 3;

  auto refs = cgf::mine_pair(set, features, 0, 1, config, 77);
  CHECK(refs.size() == 30 * 5);
  for (const auto& r : refs) {
    CHECK(r.anchor_table == 0);
    CHECK(r.positive_table == 1);
    CHECK(r.negative_table == 1);
    // The only point within tau of an anchor is its own copy.
    CHECK(r.positive_row == r.anchor_row);
    CHECK_FALSE(r.hard);  // the (tau, 2*tau] shell is empty everywhere
    CHECK(r.negative_row != r.anchor_row);
  }

  cgf::TripletSet as_set;
  as_set.entries = refs;
  auto audit = oracle::audit_triplets(set, features, as_set, config);
  CHECK(audit.clean());
  CHECK(audit.anchors == 30);
  CHECK(audit.entries == 150);
}

TEST_CASE("mining a dense line fills the hard quota from the shell") {
  PointCloud cloud = line_cloud(20, 0.1);
  AlignedSet set = make_set({cloud, cloud});
  auto features = fake_features(set);
  MiningConfig config;
  config.tau = 0.15;
  config.triplets_per_point = 5;
  config.hard_negatives_per_point = 2;
  config.random_negatives_per_point = 3;

  auto refs = cgf::mine_pair(set, features, 0, 1, config, 3);
  CHECK(refs.size() == 20 * 5);
  std::map<std::uint32_t, int> hard_per_anchor;
  for (const auto& r : refs)
    if (r.hard) hard_per_anchor[r.anchor_row] += 1;
  CHECK(hard_per_anchor.size() == 20);
  for (const auto& [row, hard] : hard_per_anchor) CHECK(hard == 2);

  cgf::TripletSet as_set;
  as_set.entries = refs;
  auto audit = oracle::audit_triplets(set, features, as_set, config);
  CHECK(audit.clean());
  CHECK(audit.bad_positive == 0);
  CHECK(audit.bad_hard == 0);
  CHECK(audit.bad_random == 0);
  CHECK(audit.bad_split == 0);
}

TEST_CASE("mining skips invalid rows on both sides") {
  PointCloud cloud = oracle::random_cloud(30, 13);
  AlignedSet set = make_set({cloud, cloud});
  auto features = fake_features(set);
  features[0].valid[0] = 0;
  features[0].valid[7] = 0;
  features[1].valid[2] = 0;
  features[1].valid[5] = 0;

  MiningConfig config;
  config.tau = 1e-3;
  config.triplets_per_point = 4;
  config.hard_negatives_per_point = 1;
  config.random_negatives_per_point = 3;
  auto refs = cgf::mine_pair(set, features, 0, 1, config, 9);

  // Anchors need their own row valid and the coincident target row valid.
  std::set<std::uint32_t> anchor_rows;
  for (const auto& r : refs) {
    anchor_rows.insert(r.anchor_row);
    CHECK(r.anchor_row != 0);
    CHECK(r.anchor_row != 7);
    CHECK(r.positive_row != 2);
    CHECK(r.positive_row != 5);
    CHECK(r.negative_row != 2);
    CHECK(r.negative_row != 5);
  }
  CHECK(anchor_rows.size() == 26);
  CHECK(refs.size() == 26 * 4);
}

TEST_CASE("mining respects the anchor budget") {
  PointCloud cloud = oracle::random_cloud(30, 17);
  AlignedSet set = make_set({cloud, cloud});
  auto features = fake_features(set);
  MiningConfig config;
  config.tau = 1e-3;
  config.triplets_per_point = 3;
  config.hard_negatives_per_point = 0;
  config.random_negatives_per_point = 3;
  config.max_anchors_per_pair = 7;

  auto refs = cgf::mine_pair(set, features, 0, 1, config, 21);
  CHECK(refs.size() == 7 * 3);
  std::set<std::uint32_t> anchors;
  for (const auto& r : refs) anchors.insert(r.anchor_row);
  CHECK(anchors.size() == 7);

  auto again = cgf::mine_pair(set, features, 0, 1, config, 21);
  REQUIRE(again.size() == refs.size());
  for (std::size_t k = 0; k < refs.size(); ++k) {
    CHECK(again[k].anchor_row == refs[k].anchor_row);
    CHECK(again[k].positive_row == refs[k].positive_row);
    CHECK(again[k].negative_row == refs[k].negative_row);
    CHECK(again[k].hard == refs[k].hard);
  }

  auto other = cgf::mine_pair(set, features, 0, 1, config, 22);
  std::set<std::uint32_t> other_anchors;
  for (const auto& r : other) other_anchors.insert(r.anchor_row);
  CHECK(other_anchors != anchors);
}

TEST_CASE("mining failure modes") {
  PointCloud cloud = oracle::random_cloud(20, 19);
  PointCloud shifted = cloud;
  for (auto& p : shifted.points) p += Vec3(5, 0, 0);
  AlignedSet set = make_set({cloud, shifted});
  auto features = fake_features(set);
  MiningConfig config;
  config.tau = 1e-3;
  config.triplets_per_point = 2;
  config.hard_negatives_per_point = 0;
  config.random_negatives_per_point = 2;

  SUBCASE("disjoint views have no anchors") {
    CHECK(code_of([&] { cgf::mine_pair(set, features, 0, 1, config, 1); }) ==
          ErrorCode::NoCorrespondences);
  }
  SUBCASE("a fully invalid view cannot be mined") {
    AlignedSet twins = make_set({cloud, cloud});
    auto twin_features = fake_features(twins);
    std::fill(twin_features[1].valid.begin(), twin_features[1].valid.end(),
              char(0));
    CHECK(code_of([&] {
            cgf::mine_pair(twins, twin_features, 0, 1, config, 1);
          }) == ErrorCode::NoCorrespondences);
  }
  SUBCASE("a tau ball swallowing the whole view leaves no negatives") {
    PointCloud tight;
    for (int k = 0; k < 5; ++k)
      tight.points.emplace_back(0.01 * k, 0.0, 0.0);
    AlignedSet tiny = make_set({tight, tight});
    auto tiny_features = fake_features(tiny);
    MiningConfig wide = config;
    wide.tau = 1.0;
    CHECK(code_of([&] {
            cgf::mine_pair(tiny, tiny_features, 0, 1, wide, 1);
          }) == ErrorCode::NoCorrespondences);
  }
  SUBCASE("bad arguments") {
    CHECK(code_of([&] { cgf::mine_pair(set, features, 0, 0, config, 1); }) ==
          ErrorCode::InvalidArgument);
    CHECK(code_of([&] { cgf::mine_pair(set, features, 0, 9, config, 1); }) ==
          ErrorCode::InvalidArgument);
    std::vector<FeaturizedCloud> short_features(1);
    CHECK(code_of([&] {
            cgf::mine_pair(set, short_features, 0, 1, config, 1);
          }) == ErrorCode::Shape);
    MiningConfig bad = config;
    bad.tau = -1.0;
    CHECK(code_of([&] { cgf::mine_pair(set, features, 0, 1, bad, 1); }) ==
          ErrorCode::InvalidArgument);
  }
}

TEST_CASE("mining a whole set walks both directions of each overlapping pair") {
  PointCloud cloud = oracle::random_cloud(25, 23);
  PointCloud far = oracle::random_cloud(25, 24);
  RigidTransform shift;
  shift.translation = Vec3(40, 0, 0);
  AlignedSet set = make_set({cloud, cloud, far},
                            {RigidTransform{}, RigidTransform{}, shift});
  auto features = fake_features(set);
  MiningConfig config;
  config.tau = 1e-3;
  config.triplets_per_point = 4;
  config.hard_negatives_per_point = 0;
  config.random_negatives_per_point = 4;
  config.seed = 5;

  cgf::TripletSet mined = cgf::mine_all(set, features, config);
  REQUIRE(mined.tables.size() == 3);
  CHECK((mined.tables[0] - features[0].values).norm() == 0.0);
  CHECK((mined.tables[2] - features[2].values).norm() == 0.0);
  CHECK(mined.size() == 2 * 25 * 4);

  std::size_t forward = 0, backward = 0;
  for (const auto& e : mined.entries) {
    CHECK(e.anchor_table != 2);  // the far view overlaps nothing
    CHECK(e.negative_table != 2);
    if (e.anchor_table == 0) ++forward;
    if (e.anchor_table == 1) ++backward;
  }
  CHECK(forward == 25 * 4);
  CHECK(backward == 25 * 4);

  cgf::TripletSet again = cgf::mine_all(set, features, config);
  REQUIRE(again.size() == mined.size());
  for (std::size_t k = 0; k < mined.size(); ++k) {
    CHECK(again.entries[k].anchor_table == mined.entries[k].anchor_table);
    CHECK(again.entries[k].anchor_row == mined.entries[k].anchor_row);
    CHECK(again.entries[k].negative_row == mined.entries[k].negative_row);
  }

  auto audit = oracle::audit_triplets(set, features, mined, config);
  CHECK(audit.clean());
}

TEST_CASE("mining tolerates one direction failing and keeps the other") {
  // The second view is a tight pair of points straddling one first-view
  // point: mining 0 -> 1 finds no negatives (the tau ball holds all of view
  // 1), mining 1 -> 0 works fine.
  PointCloud big = line_cloud(20, 1.0);
  PointCloud tiny;
  tiny.points = {big.points[4] + Vec3(0.01, 0, 0),
                 big.points[4] - Vec3(0.01, 0, 0)};
  AlignedSet set = make_set({big, tiny});
  auto features = fake_features(set);
  MiningConfig config;
  config.tau = 0.25;
  config.min_overlap = 0.1;
  config.triplets_per_point = 3;
  config.hard_negatives_per_point = 0;
  config.random_negatives_per_point = 3;

  cgf::TripletSet mined = cgf::mine_all(set, features, config);
  CHECK(mined.size() == 2 * 3);
  for (const auto& e : mined.entries) {
    CHECK(e.anchor_table == 1);
    CHECK(e.positive_row == 4);  // the only view-0 point within tau
  }
}

TEST_CASE("mining with a default tau uses a percent of the set diameter") {
  PointCloud cloud = oracle::random_cloud(25, 31);
  AlignedSet set = make_set({cloud, cloud});
  auto features = fake_features(set);
  MiningConfig config;
  config.triplets_per_point = 3;
  config.hard_negatives_per_point = 1;
  config.random_negatives_per_point = 2;
  config.seed = 3;

  cgf::TripletSet defaulted = cgf::mine_all(set, features, config);
  config.tau = 0.01 * cgf::aligned_set_diameter(set);
  cgf::TripletSet explicit_tau = cgf::mine_all(set, features, config);
  REQUIRE(defaulted.size() == explicit_tau.size());
  for (std::size_t k = 0; k < defaulted.size(); ++k) {
    CHECK(defaulted.entries[k].anchor_table ==
          explicit_tau.entries[k].anchor_table);
    CHECK(defaulted.entries[k].anchor_row ==
          explicit_tau.entries[k].anchor_row);
    CHECK(defaulted.entries[k].negative_row ==
          explicit_tau.entries[k].negative_row);
  }
}

TEST_CASE("mining reports when nothing overlaps") {
  PointCloud cloud = oracle::random_cloud(20, 37);
  RigidTransform shift;
  shift.translation = Vec3(100, 0, 0);
  AlignedSet set = make_set({cloud, cloud}, {RigidTransform{}, shift});
  auto features = fake_features(set);
  MiningConfig config;
  config.tau = 0.1;
  config.triplets_per_point = 1;
  config.hard_negatives_per_point = 0;
  config.random_negatives_per_point = 1;
  CHECK(code_of([&] { cgf::mine_all(set, features, config); }) ==
        ErrorCode::NoTriplets);
}

TEST_CASE("surface names round trip") {
  for (Surface s : {Surface::Sphere, Surface::Torus, Surface::Supertoroid,
                    Surface::BoxUnion}) {
    CHECK(cgf::surface_from_name(cgf::surface_name(s)) == s);
  }
  CHECK(std::string(cgf::surface_name(Surface::BoxUnion)) == "box_union");
  CHECK(code_of([] { cgf::surface_from_name("cube"); }) ==
        ErrorCode::InvalidArgument);
}

TEST_CASE("surface samples sit on the ideal surface with outward normals") {
  for (Surface s : {Surface::Sphere, Surface::Torus, Surface::Supertoroid,
                    Surface::BoxUnion}) {
    PointCloud cloud = cgf::sample_surface(s, 500, 42);
    REQUIRE(cloud.size() == 500);
    REQUIRE(cloud.has_normals());
    CHECK_NOTHROW(cloud.validate());
    for (std::size_t k = 0; k < cloud.size(); ++k) {
      CHECK(std::abs(cgf::surface_residual(s, cloud.points[k])) <= 1e-9);
      CHECK(std::abs(cloud.normals[k].norm() - 1.0) <= 1e-12);
      // The residual grows along the outward normal.
      double ahead =
          cgf::surface_residual(s, cloud.points[k] + 1e-5 * cloud.normals[k]);
      double behind =
          cgf::surface_residual(s, cloud.points[k] - 1e-5 * cloud.normals[k]);
      CHECK((ahead - behind) / 2e-5 > 0.1);
    }
  }
}

TEST_CASE("surface sampling is seeded") {
  PointCloud a = cgf::sample_surface(Surface::Torus, 100, 7);
  PointCloud b = cgf::sample_surface(Surface::Torus, 100, 7);
  PointCloud c = cgf::sample_surface(Surface::Torus, 100, 8);
  for (std::size_t k = 0; k < a.size(); ++k)
    CHECK((a.points[k] - b.points[k]).norm() == 0.0);
  CHECK((a.points[0] - c.points[0]).norm() > 0.0);

  CHECK(code_of([] { cgf::sample_surface(Surface::Sphere, 0, 1); }) ==
        ErrorCode::InvalidArgument);
}

TEST_CASE("synthesized views reunite on the surface in the world frame") {
  cgf::SynthConfig config;
  config.surface = Surface::Sphere;
  config.views = 6;
  config.samples = 4000;
  config.noise = 0.0;
  config.seed = 11;
  AlignedSet set = cgf::synthesize(config);
  REQUIRE(set.clouds.size() == 6);
  CHECK(set.paths[0] == "view0.xyz");
  CHECK(set.paths[5] == "view5.xyz");

  const Vec3 axis_dirs[6] = {Vec3(1, 0, 0),  Vec3(-1, 0, 0), Vec3(0, 1, 0),
                             Vec3(0, -1, 0), Vec3(0, 0, 1),  Vec3(0, 0, -1)};
  for (std::size_t v = 0; v < 6; ++v) {
    const PointCloud& cloud = set.clouds[v];
    CHECK(cloud.size() >= 16);
    REQUIRE(cloud.viewpoint.has_value());
    Vec3 camera_world = set.to_world[v].apply(*cloud.viewpoint);
    CHECK((camera_world - 3.0 * axis_dirs[v]).norm() < 1e-9);

    for (std::size_t k = 0; k < cloud.size(); ++k) {
      Vec3 world = set.to_world[v].apply(cloud.points[k]);
      CHECK(std::abs(cgf::surface_residual(Surface::Sphere, world)) < 1e-9);
      // Each kept point faces its camera (slack covers frame round trips).
      Vec3 n = set.to_world[v].apply_direction(cloud.normals[k]);
      CHECK(n.dot(camera_world - world) > -1e-9);
    }
  }

  // Neighboring cameras see caps sharing roughly 30% of their points;
  // opposing cameras see disjoint caps.
  CHECK(cgf::overlap_fraction(set, 0, 2) >= 0.25);
  CHECK(cgf::overlap_fraction(set, 0, 1) == 0.0);
  CHECK(cgf::aligned_set_diameter(set) ==
        doctest::Approx(2.0 * std::sqrt(3.0)).epsilon(0.03));
}

TEST_CASE("synthesis is deterministic per seed") {
  cgf::SynthConfig config;
  config.surface = Surface::Torus;
  config.views = 6;
  config.samples = 1500;
  config.noise = 0.002;
  config.seed = 21;
  AlignedSet a = cgf::synthesize(config);
  AlignedSet b = cgf::synthesize(config);
  REQUIRE(a.clouds.size() == b.clouds.size());
  for (std::size_t v = 0; v < a.clouds.size(); ++v) {
    REQUIRE(a.clouds[v].size() == b.clouds[v].size());
    for (std::size_t k = 0; k < a.clouds[v].size(); ++k)
      CHECK((a.clouds[v].points[k] - b.clouds[v].points[k]).norm() == 0.0);
    CHECK((a.to_world[v].rotation - b.to_world[v].rotation).norm() == 0.0);
    CHECK((a.to_world[v].translation - b.to_world[v].translation).norm() ==
          0.0);
  }

  config.seed = 22;
  AlignedSet c = cgf::synthesize(config);
  CHECK((a.to_world[0].translation - c.to_world[0].translation).norm() > 0.0);
}

TEST_CASE("synthesis noise displaces points along their normals") {
  cgf::SynthConfig config;
  config.surface = Surface::Sphere;
  config.views = 6;
  config.samples = 2000;
  config.seed = 31;
  config.noise = 0.0;
  AlignedSet clean = cgf::synthesize(config);
  config.noise = 0.01;
  AlignedSet noisy = cgf::synthesize(config);

  double max_offset = 0.0;
  for (std::size_t v = 0; v < 6; ++v) {
    REQUIRE(noisy.clouds[v].size() == clean.clouds[v].size());
    for (std::size_t k = 0; k < clean.clouds[v].size(); ++k) {
      Vec3 delta = noisy.to_world[v].apply(noisy.clouds[v].points[k]) -
                   clean.to_world[v].apply(clean.clouds[v].points[k]);
      Vec3 n = clean.to_world[v].apply_direction(clean.clouds[v].normals[k]);
      CHECK(delta.cross(n).norm() < 1e-9);
      max_offset = std::max(max_offset, delta.norm());
    }
  }
  CHECK(max_offset > 1e-4);   // the noise actually moved something
  CHECK(max_offset < 0.01 * 6);  // and stayed within a few sigma
}

TEST_CASE("synthesis failure modes") {
  cgf::SynthConfig config;
  config.samples = 16;  // a single view cannot see enough of these
  CHECK(code_of([&] { cgf::synthesize(config); }) ==
        ErrorCode::InsufficientSamples);
  config = cgf::SynthConfig{};
  config.samples = 0;
  CHECK(code_of([&] { cgf::synthesize(config); }) ==
        ErrorCode::InvalidArgument);
  config = cgf::SynthConfig{};
  config.views = 1;
  CHECK(code_of([&] { cgf::synthesize(config); }) ==
        ErrorCode::InvalidArgument);
  config = cgf::SynthConfig{};
  config.noise = -0.1;
  CHECK(code_of([&] { cgf::synthesize(config); }) ==
        ErrorCode::InvalidArgument);
}

TEST_CASE("synthesis supports non-axis-aligned view counts") {
  cgf::SynthConfig config;
  config.surface = Surface::Sphere;
  config.views = 4;
  config.samples = 3000;
  config.seed = 41;
  AlignedSet set = cgf::synthesize(config);
  REQUIRE(set.clouds.size() == 4);
  for (std::size_t v = 0; v < 4; ++v) {
    REQUIRE(set.clouds[v].viewpoint.has_value());
    Vec3 camera = set.to_world[v].apply(*set.clouds[v].viewpoint);
    CHECK(camera.norm() == doctest::Approx(3.0).epsilon(1e-9));
  }
}

}  // TEST_SUITE
