#include "cgf/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "cgf/kdtree.hpp"
#include "cgf/util.hpp"

namespace cgf {

double compute_eps(const AlignedSet& set) {
  if (set.eps_cache) return *set.eps_cache;
  require(!set.clouds.empty(), ErrorCode::InvalidArgument,
          "aligned set has no clouds");
  double eps = resolution(set.clouds);
  require(eps > 0.0, ErrorCode::DegenerateCloud,
          "aligned set resolution is zero (duplicate-dominated cloud)");
  set.eps_cache = eps;
  return eps;
}

double aligned_set_diameter(const AlignedSet& set) {
  require(!set.clouds.empty(), ErrorCode::InvalidArgument,
          "aligned set has no clouds");
  bool first = true;
  Vec3 lo = Vec3::Zero(), hi = Vec3::Zero();
  for (std::size_t i = 0; i < set.clouds.size(); ++i) {
    for (const auto& p : set.clouds[i].points) {
      Vec3 w = set.to_world[i].apply(p);
      if (first) {
        lo = hi = w;
        first = false;
      } else {
        lo = lo.cwiseMin(w);
        hi = hi.cwiseMax(w);
      }
    }
  }
  return (hi - lo).norm();
}

double overlap_fraction(const PointCloud& a, const RigidTransform& a_to_world,
                        const PointCloud& b, const RigidTransform& b_to_world,
                        double epsilon) {
  require(epsilon > 0.0, ErrorCode::InvalidArgument,
          "overlap epsilon must be positive");
  a.validate();
  b.validate();
  std::vector<Vec3> b_world(b.size());
  for (std::size_t k = 0; k < b.size(); ++k)
    b_world[k] = b_to_world.apply(b.points[k]);
  KdTree tree(b_world);
  std::size_t hits = 0;
  for (const auto& p : a.points) {
    auto nn = tree.nearest(a_to_world.apply(p));
    if (nn.distance <= epsilon) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(a.size());
}

double overlap_fraction(const AlignedSet& set, std::size_t i, std::size_t j) {
  require(i < set.clouds.size() && j < set.clouds.size(),
          ErrorCode::InvalidArgument, "cloud index out of range");
  return overlap_fraction(set.clouds[i], set.to_world[i], set.clouds[j],
                          set.to_world[j], compute_eps(set));
}

std::vector<OverlapPair> find_overlapping_pairs(const AlignedSet& set,
                                                double threshold) {
  require(set.clouds.size() >= 2, ErrorCode::InvalidArgument,
          "need at least two clouds to pair");
  std::vector<OverlapPair> pairs;
  for (std::size_t i = 0; i < set.clouds.size(); ++i) {
    for (std::size_t j = i + 1; j < set.clouds.size(); ++j) {
      double a_ij = overlap_fraction(set, i, j);
      double a_ji = overlap_fraction(set, j, i);
      if (std::min(a_ij, a_ji) >= threshold)
        pairs.push_back({i, j, a_ij, a_ji});
    }
  }
  return pairs;
}

void MiningConfig::validate() const {
  require(tau > 0.0, ErrorCode::InvalidArgument, "tau must be positive");
  require(triplets_per_point >= 1, ErrorCode::InvalidArgument,
          "triplets per point must be >= 1");
  require(hard_negatives_per_point >= 0 && random_negatives_per_point >= 0,
          ErrorCode::InvalidArgument, "negative counts must be >= 0");
  require(hard_negatives_per_point + random_negatives_per_point ==
              triplets_per_point,
          ErrorCode::InvalidArgument,
          "hard + random negatives must equal triplets per point");
  require(min_overlap >= 0.0 && min_overlap <= 1.0, ErrorCode::InvalidArgument,
          "overlap threshold must lie in [0, 1]");
}

namespace {

struct ViewIndex {
  std::vector<Vec3> world_points;        // all points, world frame
  std::vector<std::size_t> valid_ids;    // indices of valid feature rows
  std::vector<Vec3> valid_world;         // world positions of valid points
  KdTree valid_tree;                     // over valid_world
};

ViewIndex build_view_index(const AlignedSet& set,
                           const std::vector<FeaturizedCloud>& features,
                           std::size_t v) {
  ViewIndex out;
  const PointCloud& cloud = set.clouds[v];
  const RigidTransform& t = set.to_world[v];
  out.world_points.resize(cloud.size());
  for (std::size_t k = 0; k < cloud.size(); ++k)
    out.world_points[k] = t.apply(cloud.points[k]);
  for (std::size_t k = 0; k < cloud.size(); ++k)
    if (features[v].valid[k]) {
      out.valid_ids.push_back(k);
      out.valid_world.push_back(out.world_points[k]);
    }
  if (!out.valid_world.empty()) out.valid_tree = KdTree(out.valid_world);
  return out;
}

std::vector<TripletRef> mine_pair_indexed(const ViewIndex& anchor_view,
                                          const ViewIndex& target_view,
                                          std::uint32_t table_i,
                                          std::uint32_t table_j,
                                          const MiningConfig& config,
                                          std::uint64_t seed) {
  std::vector<TripletRef> out;
  if (anchor_view.valid_ids.empty() || target_view.valid_ids.empty()) {
    throw_error(ErrorCode::NoCorrespondences,
                "a view has no valid features to mine from");
  }
  std::mt19937_64 rng(seed);

  // Anchors: valid points with at least one valid counterpart within tau.
  std::vector<std::size_t> anchors;  // positions into anchor_view.valid_ids
  for (std::size_t a = 0; a < anchor_view.valid_ids.size(); ++a) {
    auto nn = target_view.valid_tree.nearest(
        anchor_view.valid_world[a]);
    if (nn.distance <= config.tau) anchors.push_back(a);
  }
  if (anchors.empty())
    throw_error(ErrorCode::NoCorrespondences,
                "no anchor has a counterpart within tau");

  if (config.max_anchors_per_pair > 0 &&
      anchors.size() > config.max_anchors_per_pair) {
    std::shuffle(anchors.begin(), anchors.end(), rng);
    anchors.resize(config.max_anchors_per_pair);
    std::sort(anchors.begin(), anchors.end());
  }

  std::size_t valid_count = target_view.valid_ids.size();
  for (std::size_t a : anchors) {
    const Vec3& world = anchor_view.valid_world[a];
    auto ball = target_view.valid_tree.radius(world, config.tau);
    auto shell_outer = target_view.valid_tree.radius(world, 2.0 * config.tau);
    std::vector<std::size_t> shell;
    std::set_difference(shell_outer.begin(), shell_outer.end(), ball.begin(),
                        ball.end(), std::back_inserter(shell));

    bool negatives_exist = ball.size() < valid_count;
    if (!negatives_exist) continue;  // tau ball swallows the whole view

    std::uniform_int_distribution<std::size_t> pick_positive(0, ball.size() - 1);
    std::uniform_int_distribution<std::size_t> pick_any(0, valid_count - 1);

    auto anchor_row =
        static_cast<std::uint32_t>(anchor_view.valid_ids[a]);
    for (int k = 0; k < config.triplets_per_point; ++k) {
      bool want_hard = k < config.hard_negatives_per_point && !shell.empty();
      std::size_t positive = ball[pick_positive(rng)];
      std::size_t negative;
      bool hard = false;
      if (want_hard) {
        std::uniform_int_distribution<std::size_t> pick_shell(0, shell.size() - 1);
        negative = shell[pick_shell(rng)];
        hard = true;
      } else {
        do {
          negative = pick_any(rng);
        } while ((target_view.valid_world[negative] - world).norm() <=
                 config.tau);
      }
      out.push_back({table_i, anchor_row, table_j,
                     static_cast<std::uint32_t>(target_view.valid_ids[positive]),
                     table_j,
                     static_cast<std::uint32_t>(target_view.valid_ids[negative]),
                     hard});
    }
  }
  if (out.empty())
    throw_error(ErrorCode::NoCorrespondences,
                "no triplets could be mined for the pair");
  return out;
}

}  // namespace

std::vector<TripletRef> mine_pair(const AlignedSet& set,
                                  const std::vector<FeaturizedCloud>& features,
                                  std::size_t i, std::size_t j,
                                  const MiningConfig& config,
                                  std::uint64_t seed) {
  config.validate();
  require(i < set.clouds.size() && j < set.clouds.size() && i != j,
          ErrorCode::InvalidArgument, "bad view pair");
  require(features.size() == set.clouds.size(), ErrorCode::Shape,
          "feature count does not match cloud count");
  ViewIndex anchor_view = build_view_index(set, features, i);
  ViewIndex target_view = build_view_index(set, features, j);
  return mine_pair_indexed(anchor_view, target_view,
                           static_cast<std::uint32_t>(i),
                           static_cast<std::uint32_t>(j), config, seed);
}

TripletSet mine_all(const AlignedSet& set,
                    const std::vector<FeaturizedCloud>& features,
                    const MiningConfig& config) {
  MiningConfig effective = config;
  if (effective.tau <= 0.0)
    effective.tau = 0.01 * aligned_set_diameter(set);
  effective.validate();
  require(features.size() == set.clouds.size(), ErrorCode::Shape,
          "feature count does not match cloud count");

  auto pairs = find_overlapping_pairs(set, effective.min_overlap);
  std::vector<ViewIndex> views(set.clouds.size());
  for (std::size_t v = 0; v < set.clouds.size(); ++v)
    views[v] = build_view_index(set, features, v);

  TripletSet result;
  for (std::size_t v = 0; v < features.size(); ++v)
    result.tables.push_back(features[v].values);

  for (const auto& pair : pairs) {
    for (auto [i, j] : {std::pair{pair.i, pair.j}, std::pair{pair.j, pair.i}}) {
      std::string stage = "mine-" + std::to_string(i) + "-" + std::to_string(j);
      std::uint64_t seed = derive_seed(effective.seed, stage);
      try {
        auto refs = mine_pair_indexed(views[i], views[j],
                                      static_cast<std::uint32_t>(i),
                                      static_cast<std::uint32_t>(j), effective,
                                      seed);
        result.entries.insert(result.entries.end(), refs.begin(), refs.end());
      } catch (const Error& e) {
        if (e.code() != ErrorCode::NoCorrespondences) throw;
      }
    }
  }
  require(!result.entries.empty(), ErrorCode::NoTriplets,
          "mining produced no triplets");
  std::mt19937_64 shuffle_rng(derive_seed(effective.seed, "shuffle"));
  std::shuffle(result.entries.begin(), result.entries.end(), shuffle_rng);
  return result;
}

Surface surface_from_name(const std::string& name) {
  if (name == "sphere") return Surface::Sphere;
  if (name == "torus") return Surface::Torus;
  if (name == "supertoroid") return Surface::Supertoroid;
  if (name == "box_union") return Surface::BoxUnion;
  throw_error(ErrorCode::InvalidArgument, "unknown surface '" + name + "'");
}

const char* surface_name(Surface surface) {
  switch (surface) {
    case Surface::Sphere: return "sphere";
    case Surface::Torus: return "torus";
    case Surface::Supertoroid: return "supertoroid";
    case Surface::BoxUnion: return "box_union";
  }
  return "unknown";
}

namespace {

constexpr double kTorusMajor = 1.0;
constexpr double kTorusMinor = 0.35;
constexpr double kSuperMajor = 1.0;
constexpr double kSuperMinor = 0.4;

struct Box {
  Vec3 center;
  Vec3 half;
};

const Box kBoxA{{0.0, 0.0, 0.0}, {0.6, 0.45, 0.35}};
const Box kBoxB{{0.45, 0.2, 0.15}, {0.45, 0.6, 0.3}};

double box_sdf(const Box& box, const Vec3& p) {
  Vec3 q = (p - box.center).cwiseAbs() - box.half;
  Vec3 outside = q.cwiseMax(0.0);
  double inside = std::min(q.maxCoeff(), 0.0);
  return outside.norm() + inside;
}

bool strictly_inside(const Box& box, const Vec3& p) {
  Vec3 q = (p - box.center).cwiseAbs();
  return q.x() < box.half.x() && q.y() < box.half.y() && q.z() < box.half.z();
}

struct SurfaceSample {
  Vec3 point;
  Vec3 normal;
};

SurfaceSample sample_sphere(std::mt19937_64& rng) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  Vec3 dir;
  do {
    dir = Vec3(gauss(rng), gauss(rng), gauss(rng));
  } while (dir.norm() < 1e-12);
  dir.normalize();
  return {dir, dir};
}

SurfaceSample sample_torus(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> angle(0.0, 2.0 * M_PI);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  // Rejection on the tube angle for area uniformity.
  double u, v;
  do {
    u = angle(rng);
    v = angle(rng);
  } while (unit(rng) >
           (kTorusMajor + kTorusMinor * std::cos(v)) / (kTorusMajor + kTorusMinor));
  double ring = kTorusMajor + kTorusMinor * std::cos(v);
  Vec3 p(ring * std::cos(u), ring * std::sin(u), kTorusMinor * std::sin(v));
  Vec3 n(std::cos(v) * std::cos(u), std::cos(v) * std::sin(u), std::sin(v));
  return {p, n};
}

SurfaceSample sample_supertoroid(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> angle(0.0, 2.0 * M_PI);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  double u, v, xi, zeta;
  while (true) {
    u = angle(rng);
    v = angle(rng);
    double cv = std::cos(v), sv = std::sin(v);
    xi = kSuperMinor * std::copysign(std::sqrt(std::abs(cv)), cv);
    zeta = kSuperMinor * std::copysign(std::sqrt(std::abs(sv)), sv);
    // Ring-length weighting, as for the torus.
    if (unit(rng) <=
        (kSuperMajor + xi) / (kSuperMajor + kSuperMinor))
      break;
  }
  double ring = kSuperMajor + xi;
  Vec3 p(ring * std::cos(u), ring * std::sin(u), zeta);
  double rho = ring;
  Vec3 grad(4.0 * xi * xi * xi * (p.x() / rho),
            4.0 * xi * xi * xi * (p.y() / rho), 4.0 * zeta * zeta * zeta);
  double norm = grad.norm();
  Vec3 n = norm > 1e-12 ? Vec3(grad / norm) : Vec3(0, 0, 1);
  return {p, n};
}

SurfaceSample sample_box_union(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const Box* boxes[2] = {&kBoxA, &kBoxB};
  // Face areas of both boxes, in a fixed order: (box, axis, sign).
  double areas[12];
  double total = 0.0;
  for (int b = 0; b < 2; ++b) {
    const Vec3& h = boxes[b]->half;
    double face[3] = {4.0 * h.y() * h.z(), 4.0 * h.x() * h.z(),
                      4.0 * h.x() * h.y()};
    for (int axis = 0; axis < 3; ++axis)
      for (int sign = 0; sign < 2; ++sign) {
        areas[b * 6 + axis * 2 + sign] = face[axis];
        total += face[axis];
      }
  }
  while (true) {
    double pick = unit(rng) * total;
    int chosen = 0;
    for (; chosen < 11; ++chosen) {
      if (pick < areas[chosen]) break;
      pick -= areas[chosen];
    }
    int b = chosen / 6, axis = (chosen % 6) / 2, sign = chosen % 2;
    const Box& box = *boxes[b];
    Vec3 p = box.center;
    p[axis] += (sign == 0 ? 1.0 : -1.0) * box.half[axis];
    int u_axis = (axis + 1) % 3, v_axis = (axis + 2) % 3;
    p[u_axis] += (2.0 * unit(rng) - 1.0) * box.half[u_axis];
    p[v_axis] += (2.0 * unit(rng) - 1.0) * box.half[v_axis];
    const Box& other = *boxes[1 - b];
    if (strictly_inside(other, p)) continue;  // not on the union surface
    Vec3 n = Vec3::Zero();
    n[axis] = sign == 0 ? 1.0 : -1.0;
    return {p, n};
  }
}

SurfaceSample sample_one(Surface surface, std::mt19937_64& rng) {
  switch (surface) {
    case Surface::Sphere: return sample_sphere(rng);
    case Surface::Torus: return sample_torus(rng);
    case Surface::Supertoroid: return sample_supertoroid(rng);
    case Surface::BoxUnion: return sample_box_union(rng);
  }
  throw_error(ErrorCode::InvalidArgument, "unknown surface");
}

std::vector<Vec3> view_directions(int views) {
  std::vector<Vec3> dirs;
  if (views == 6) {
    dirs = {Vec3(1, 0, 0),  Vec3(-1, 0, 0), Vec3(0, 1, 0),
            Vec3(0, -1, 0), Vec3(0, 0, 1),  Vec3(0, 0, -1)};
  } else {
    // Fibonacci spiral over the sphere.
    double golden = M_PI * (3.0 - std::sqrt(5.0));
    for (int k = 0; k < views; ++k) {
      double z = 1.0 - 2.0 * (k + 0.5) / views;
      double r = std::sqrt(std::max(0.0, 1.0 - z * z));
      double phi = golden * k;
      dirs.emplace_back(r * std::cos(phi), r * std::sin(phi), z);
    }
  }
  return dirs;
}

}  // namespace

double surface_residual(Surface surface, const Vec3& p) {
  switch (surface) {
    case Surface::Sphere:
      return p.norm() - 1.0;
    case Surface::Torus: {
      double ring = std::hypot(p.x(), p.y()) - kTorusMajor;
      return std::hypot(ring, p.z()) - kTorusMinor;
    }
    case Surface::Supertoroid: {
      double xi = std::hypot(p.x(), p.y()) - kSuperMajor;
      double zeta = p.z();
      double quartic = xi * xi * xi * xi + zeta * zeta * zeta * zeta;
      return std::pow(quartic, 0.25) - kSuperMinor;
    }
    case Surface::BoxUnion:
      return std::min(box_sdf(kBoxA, p), box_sdf(kBoxB, p));
  }
  throw_error(ErrorCode::InvalidArgument, "unknown surface");
}

PointCloud sample_surface(Surface surface, int count, std::uint64_t seed) {
  require(count > 0, ErrorCode::InvalidArgument, "sample count must be positive");
  std::mt19937_64 rng(seed);
  PointCloud cloud;
  cloud.points.reserve(static_cast<std::size_t>(count));
  cloud.normals.reserve(static_cast<std::size_t>(count));
  for (int k = 0; k < count; ++k) {
    auto s = sample_one(surface, rng);
    cloud.points.push_back(s.point);
    cloud.normals.push_back(s.normal);
  }
  return cloud;
}

void SynthConfig::validate() const {
  require(samples > 0, ErrorCode::InvalidArgument,
          "sample count must be positive");
  require(views >= 2, ErrorCode::InvalidArgument, "need at least two views");
  require(noise >= 0.0, ErrorCode::InvalidArgument,
          "noise sigma must be non-negative");
}

AlignedSet synthesize(const SynthConfig& config) {
  config.validate();
  constexpr double kCameraDistance = 3.0;
  constexpr double kMaxTranslation = 1.0;
  constexpr std::size_t kMinViewPoints = 16;

  PointCloud base =
      sample_surface(config.surface, config.samples, derive_seed(config.seed, "base"));

  auto dirs = view_directions(config.views);
  AlignedSet set;
  for (int v = 0; v < config.views; ++v) {
    std::string tag = std::to_string(v);
    Vec3 camera = kCameraDistance * dirs[static_cast<std::size_t>(v)];
    std::mt19937_64 noise_rng(derive_seed(config.seed, "noise-" + tag));
    std::normal_distribution<double> noise_dist(0.0, 1.0);

    PointCloud world;
    for (std::size_t k = 0; k < base.size(); ++k) {
      if (base.normals[k].dot(camera - base.points[k]) <= 0.0) continue;
      Vec3 p = base.points[k];
      if (config.noise > 0.0)
        p += config.noise * noise_dist(noise_rng) * base.normals[k];
      world.points.push_back(p);
      world.normals.push_back(base.normals[k]);
    }
    require(world.size() >= kMinViewPoints, ErrorCode::InsufficientSamples,
            "view " + tag + " sees too few surface points");
    world.viewpoint = camera;

    RigidTransform to_world = random_rigid_transform(
        derive_seed(config.seed, "pose-" + tag), kMaxTranslation);
    set.clouds.push_back(world.transformed(to_world.inverse()));
    set.to_world.push_back(to_world);
    set.paths.push_back("view" + tag + ".xyz");
  }
  return set;
}

}  // namespace cgf
