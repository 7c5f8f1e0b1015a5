#pragma once

#include <string>
#include <vector>

#include "cgf/geometry.hpp"
#include "cgf/kdtree.hpp"
#include "cgf/lrf.hpp"

namespace cgf {

// Spherical histogram layout: radial bins have logarithmically spaced outer
// thresholds between r_min and r, elevation is the polar angle from the
// frame z axis, azimuth winds around z starting at x.
struct HistogramConfig {
  int radial_bins = 17;
  int elevation_bins = 11;
  int azimuth_bins = 12;
  double radius = 0.0;        // support radius r
  double min_radius = 0.0;    // innermost threshold r_min
  double lrf_radius = 0.0;    // frame estimation radius
  double normal_radius = 0.0; // 0: use lrf_radius
  unsigned threads = 0;

  int bin_count() const { return radial_bins * elevation_bins * azimuth_bins; }
  void validate() const;
};

// Radial threshold ladder t_0..t_R (R+1 values), strictly increasing with
// t_0 = r_min and t_R = r. Radial bin j spans [t_j, t_{j+1}) for j >= 1;
// bin 0 spans [0, t_1) so points inside r_min are kept.
std::vector<double> radial_thresholds(const HistogramConfig& config);

constexpr int kOutside = -1;

// Flat bin index of a neighbor offset given in local-frame coordinates, or
// kOutside when the offset's norm exceeds r. Norm exactly r lands in the
// last radial bin; a zero offset lands in bin 0.
int bin_index(const HistogramConfig& config, const Vec3& local_offset);

// Histogram at one point: fraction of support-ball neighbors (center point
// excluded) per bin. Sums to 1 when the neighborhood is non-empty.
std::vector<double> compute_histogram(const PointCloud& cloud, const KdTree& tree,
                                      std::size_t index, const Frame& frame,
                                      const HistogramConfig& config);

// Histograms for every point. Rows of `values` are histograms; valid[i] is
// false when the point had no frame (degenerate neighborhood) and its row is
// zero.
struct FeaturizedCloud {
  HistogramConfig config;
  Eigen::MatrixXd values;
  std::vector<char> valid;

  std::size_t size() const { return static_cast<std::size_t>(values.rows()); }
  std::size_t valid_count() const;
};

// Frames use the cloud's own normals when present, estimated ones otherwise
// (estimation radius normal_radius, falling back to lrf_radius when unset).
// Points with degenerate neighborhoods are flagged invalid with a zero row.
FeaturizedCloud featurize(const PointCloud& cloud, const HistogramConfig& config);

// Batch file format: header "CGFH <R> <E> <A> <r> <r_min> <count>" then one
// line per point, "<valid-flag> <v_0> ... <v_{N-1}>".
void write_histograms(const FeaturizedCloud& features, const std::string& path);
FeaturizedCloud read_histograms(const std::string& path);

}  // namespace cgf
