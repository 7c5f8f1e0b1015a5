#include "cgf/histogram.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "cgf/util.hpp"

namespace cgf {

void HistogramConfig::validate() const {
  require(radial_bins >= 1 && elevation_bins >= 1 && azimuth_bins >= 1,
          ErrorCode::InvalidArgument, "bin counts must be at least 1");
  require(radius > 0.0, ErrorCode::InvalidRadius,
          "support radius must be positive");
  require(min_radius > 0.0 && min_radius < radius, ErrorCode::InvalidRadius,
          "min radius must satisfy 0 < r_min < r");
}

std::vector<double> radial_thresholds(const HistogramConfig& config) {
  config.validate();
  int r_bins = config.radial_bins;
  std::vector<double> t(static_cast<std::size_t>(r_bins) + 1);
  double log_min = std::log(config.min_radius);
  double log_ratio = std::log(config.radius / config.min_radius);
  for (int i = 0; i <= r_bins; ++i)
    t[static_cast<std::size_t>(i)] =
        std::exp(log_min + (static_cast<double>(i) / r_bins) * log_ratio);
  t.front() = config.min_radius;
  t.back() = config.radius;  // forces the closed outer boundary exactly
  for (std::size_t i = 1; i < t.size(); ++i)
    require(t[i] > t[i - 1], ErrorCode::InvalidRadius,
            "radial thresholds are not strictly increasing");
  return t;
}

namespace {

int bin_index_with(const HistogramConfig& config,
                   const std::vector<double>& thresholds,
                   const Vec3& local_offset) {
  double d = local_offset.norm();
  if (d > config.radius) return kOutside;
  if (d == 0.0) return 0;

  int radial;
  if (d < thresholds[1]) {
    radial = 0;
  } else {
    auto it = std::upper_bound(thresholds.begin() + 1, thresholds.end(), d);
    radial = static_cast<int>(it - thresholds.begin()) - 1;
    radial = std::min(radial, config.radial_bins - 1);
  }

  double polar = std::acos(std::clamp(local_offset.z() / d, -1.0, 1.0));
  int elevation = std::min(
      static_cast<int>(polar / (M_PI / config.elevation_bins)),
      config.elevation_bins - 1);

  double azimuth_angle = std::atan2(local_offset.y(), local_offset.x());
  if (azimuth_angle < 0.0) azimuth_angle += 2.0 * M_PI;
  int azimuth = std::min(
      static_cast<int>(azimuth_angle / (2.0 * M_PI / config.azimuth_bins)),
      config.azimuth_bins - 1);

  return radial * config.elevation_bins * config.azimuth_bins +
         elevation * config.azimuth_bins + azimuth;
}

}  // namespace

int bin_index(const HistogramConfig& config, const Vec3& local_offset) {
  return bin_index_with(config, radial_thresholds(config), local_offset);
}

std::vector<double> compute_histogram(const PointCloud& cloud, const KdTree& tree,
                                      std::size_t index, const Frame& frame,
                                      const HistogramConfig& config) {
  auto thresholds = radial_thresholds(config);
  require(index < cloud.size(), ErrorCode::InvalidArgument,
          "point index out of range");
  std::vector<double> values(static_cast<std::size_t>(config.bin_count()), 0.0);
  const Vec3& p = cloud.points[index];
  auto ids = tree.radius(p, config.radius);
  std::size_t neighbor_count = 0;
  for (auto id : ids) {
    if (id == index) continue;
    Vec3 local = frame.to_local(cloud.points[id] - p);
    int bin = bin_index_with(config, thresholds, local);
    if (bin == kOutside) continue;  // boundary roundoff in the frame change
    values[static_cast<std::size_t>(bin)] += 1.0;
    ++neighbor_count;
  }
  if (neighbor_count > 0)
    for (auto& v : values) v /= static_cast<double>(neighbor_count);
  return values;
}

std::size_t FeaturizedCloud::valid_count() const {
  return static_cast<std::size_t>(std::count(valid.begin(), valid.end(), 1));
}

FeaturizedCloud featurize(const PointCloud& cloud, const HistogramConfig& config) {
  config.validate();
  require(config.lrf_radius > 0.0, ErrorCode::InvalidRadius,
          "frame radius must be positive");
  cloud.validate();
  KdTree tree(cloud.points);
  double normal_radius =
      config.normal_radius > 0.0 ? config.normal_radius : config.lrf_radius;

  FeaturizedCloud out;
  out.config = config;
  out.values = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(cloud.size()),
                                     config.bin_count());
  out.valid.assign(cloud.size(), 0);

  parallel_for(cloud.size(), config.threads, [&](std::size_t i) {
    try {
      Vec3 normal = cloud.has_normals()
                        ? cloud.normals[i]
                        : estimate_normal(cloud, tree, i, normal_radius);
      Frame frame = estimate_frame(cloud, tree, i, config.lrf_radius, normal);
      auto values = compute_histogram(cloud, tree, i, frame, config);
      for (std::size_t k = 0; k < values.size(); ++k)
        out.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) =
            values[k];
      out.valid[i] = 1;
    } catch (const Error& e) {
      if (e.code() != ErrorCode::DegenerateNeighborhood) throw;
    }
  });
  return out;
}

void write_histograms(const FeaturizedCloud& features, const std::string& path) {
  std::ofstream out(path);
  require(out.good(), ErrorCode::Io, "cannot write: " + path);
  const auto& c = features.config;
  out << "CGFH " << c.radial_bins << ' ' << c.elevation_bins << ' '
      << c.azimuth_bins << ' ' << format_double(c.radius) << ' '
      << format_double(c.min_radius) << ' ' << features.size() << '\n';
  for (std::size_t i = 0; i < features.size(); ++i) {
    out << static_cast<int>(features.valid[i]);
    for (Eigen::Index k = 0; k < features.values.cols(); ++k)
      out << ' ' << format_double(features.values(static_cast<Eigen::Index>(i), k));
    out << '\n';
  }
  require(out.good(), ErrorCode::Io, "write failed: " + path);
}

FeaturizedCloud read_histograms(const std::string& path) {
  std::ifstream in(path);
  require(in.good(), ErrorCode::Io, "cannot open: " + path);
  std::string line;
  std::size_t line_no = 0;

  auto next_data_line = [&]() -> bool {
    while (std::getline(in, line)) {
      ++line_no;
      if (auto pos = line.find('#'); pos != std::string::npos) line.resize(pos);
      if (line.find_first_not_of(" \t\r") != std::string::npos) return true;
    }
    return false;
  };

  require(next_data_line(), ErrorCode::Parse, path + ": empty file");
  std::istringstream header(line);
  std::string magic;
  FeaturizedCloud out;
  std::size_t count = 0;
  header >> magic >> out.config.radial_bins >> out.config.elevation_bins >>
      out.config.azimuth_bins >> out.config.radius >> out.config.min_radius >>
      count;
  require(!header.fail() && magic == "CGFH", ErrorCode::Parse,
          path + ": bad histogram header");
  out.config.validate();

  out.values = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(count),
                                     out.config.bin_count());
  out.valid.assign(count, 0);
  for (std::size_t i = 0; i < count; ++i) {
    require(next_data_line(), ErrorCode::Parse,
            path + ": expected " + std::to_string(count) + " rows, got " +
                std::to_string(i));
    std::istringstream row(line);
    int flag = 0;
    row >> flag;
    require(!row.fail() && (flag == 0 || flag == 1), ErrorCode::Parse,
            path + ":" + std::to_string(line_no) + ": bad validity flag");
    out.valid[i] = static_cast<char>(flag);
    for (int k = 0; k < out.config.bin_count(); ++k) {
      double v = 0.0;
      row >> v;
      require(!row.fail(), ErrorCode::Parse,
              path + ":" + std::to_string(line_no) + ": short histogram row");
      out.values(static_cast<Eigen::Index>(i), k) = v;
    }
    double trailing;
    require(!(row >> trailing), ErrorCode::Parse,
            path + ":" + std::to_string(line_no) + ": excess fields in row");
  }
  return out;
}

}  // namespace cgf
