#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cgf/histogram.hpp"
#include "cgf/io.hpp"
#include "cgf/net.hpp"

namespace cgf {

// Resolution of an aligned set: per cloud, the median (lower middle) of
// nearest-other-point distances, maximized over clouds. Cached on the set.
double compute_eps(const AlignedSet& set);

// Bounding-box diagonal of all clouds together in the world frame.
double aligned_set_diameter(const AlignedSet& set);

// Fraction of cloud a's points whose world-frame nearest neighbor in cloud b
// lies within epsilon.
double overlap_fraction(const PointCloud& a, const RigidTransform& a_to_world,
                        const PointCloud& b, const RigidTransform& b_to_world,
                        double epsilon);
double overlap_fraction(const AlignedSet& set, std::size_t i, std::size_t j);

struct OverlapPair {
  std::size_t i, j;         // i < j
  double alpha_ij, alpha_ji;
};

// All unordered cloud pairs with min(alpha_ij, alpha_ji) >= threshold.
std::vector<OverlapPair> find_overlapping_pairs(const AlignedSet& set,
                                                double threshold = 0.3);

struct MiningConfig {
  double tau = 0.0;                  // positive radius, world units; > 0
  int triplets_per_point = 40;
  int hard_negatives_per_point = 15;
  int random_negatives_per_point = 25;
  double min_overlap = 0.3;
  std::uint64_t seed = 0;
  std::size_t max_anchors_per_pair = 0;  // 0: every eligible anchor

  void validate() const;
};

// Triplets mined from one ordered view pair (i -> j). Anchors are valid
// points of view i with at least one valid point of view j within tau of
// their aligned position; positives are sampled from that tau ball, hard
// negatives from the (tau, 2*tau] shell, random negatives from outside the
// tau ball. Empty shells are backfilled with random negatives. Table indices
// in the result refer to views i and j of the set.
std::vector<TripletRef> mine_pair(const AlignedSet& set,
                                  const std::vector<FeaturizedCloud>& features,
                                  std::size_t i, std::size_t j,
                                  const MiningConfig& config,
                                  std::uint64_t seed);

// Mines both directions of every overlapping pair, then shuffles globally.
// Tables of the result hold one histogram matrix per view.
TripletSet mine_all(const AlignedSet& set,
                    const std::vector<FeaturizedCloud>& features,
                    const MiningConfig& config);

// Analytic test surfaces.
enum class Surface {
  Sphere,
  Torus,
  Supertoroid,
  BoxUnion,
};

Surface surface_from_name(const std::string& name);
const char* surface_name(Surface surface);

// Signed distance to the ideal surface; zero at exact surface samples.
double surface_residual(Surface surface, const Vec3& p);

// Area-uniform surface samples with outward normals, no visibility crop.
PointCloud sample_surface(Surface surface, int count, std::uint64_t seed);

struct SynthConfig {
  Surface surface = Surface::Sphere;
  int views = 6;
  int samples = 16000;               // base surface samples shared by views
  double noise = 0.0;                // Gaussian sigma along the normal
  std::uint64_t seed = 0;

  void validate() const;
};

// Draws one base sampling of the surface, then crops it per view to the
// points whose outward normal faces that view's camera. Each view displaces
// its points along their normals by per-view Gaussian noise and is expressed
// in a randomized local frame with the exact transform back to the shared
// frame recorded, so views of the same surface region contain noisy copies
// of the same base points. Cameras sit on a sphere around the model
// (axis-aligned for views == 6, Fibonacci-spiral otherwise); each cloud
// records its camera position as the viewpoint.
AlignedSet synthesize(const SynthConfig& config);

}  // namespace cgf
