#include "cgf/matching.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <sstream>

#include "cgf/kdtree.hpp"
#include "cgf/util.hpp"

namespace cgf {

std::vector<Correspondence> match_features(const FeatureSet& query,
                                           const FeatureSet& target) {
  require(target.size() > 0, ErrorCode::EmptyTarget,
          "cannot match against an empty feature set");
  require(query.dim == target.dim, ErrorCode::Shape,
          "feature dimensions do not match");
  KdTree tree(target.vectors);
  std::vector<Correspondence> out;
  out.reserve(query.size());
  Eigen::VectorXd q(query.dim);
  for (std::size_t i = 0; i < query.size(); ++i) {
    q = query.vectors.row(static_cast<Eigen::Index>(i));
    auto nn = tree.nearest(q);
    out.push_back({query.indices[i], target.indices[nn.index], nn.distance});
  }
  return out;
}

std::vector<Correspondence> prune_matches(
    const std::vector<Correspondence>& matches, const PointCloud& query_cloud,
    const RigidTransform& query_to_world, const PointCloud& target_cloud,
    const RigidTransform& target_to_world, double tau) {
  require(tau > 0.0, ErrorCode::InvalidArgument, "tau must be positive");
  target_cloud.validate();
  std::vector<Vec3> target_world(target_cloud.size());
  for (std::size_t k = 0; k < target_cloud.size(); ++k)
    target_world[k] = target_to_world.apply(target_cloud.points[k]);
  KdTree tree(target_world);
  std::vector<Correspondence> out;
  for (const auto& m : matches) {
    require(m.query_index < query_cloud.size(), ErrorCode::InvalidArgument,
            "correspondence query index out of range");
    Vec3 world = query_to_world.apply(query_cloud.points[m.query_index]);
    if (tree.nearest(world).distance <= tau) out.push_back(m);
  }
  return out;
}

std::vector<Correspondence> world_residuals(
    const std::vector<Correspondence>& matches, const PointCloud& query_cloud,
    const RigidTransform& query_to_world, const PointCloud& target_cloud,
    const RigidTransform& target_to_world) {
  std::vector<Correspondence> out;
  out.reserve(matches.size());
  for (const auto& m : matches) {
    require(m.query_index < query_cloud.size() &&
                m.match_index < target_cloud.size(),
            ErrorCode::InvalidArgument, "correspondence index out of range");
    Vec3 a = query_to_world.apply(query_cloud.points[m.query_index]);
    Vec3 b = target_to_world.apply(target_cloud.points[m.match_index]);
    out.push_back({m.query_index, m.match_index, (a - b).norm()});
  }
  return out;
}

double precision(const std::vector<Correspondence>& matches,
                 const PointCloud& query_cloud,
                 const RigidTransform& query_to_world,
                 const PointCloud& target_cloud,
                 const RigidTransform& target_to_world, double threshold) {
  require(!matches.empty(), ErrorCode::NoRetainedMatches,
          "precision over an empty correspondence set is undefined");
  auto residuals = world_residuals(matches, query_cloud, query_to_world,
                                   target_cloud, target_to_world);
  std::size_t hits = 0;
  for (const auto& m : residuals)
    if (m.distance <= threshold) ++hits;
  return static_cast<double>(hits) / static_cast<double>(matches.size());
}

std::vector<double> precision_curve(const std::vector<Correspondence>& matches,
                                    const PointCloud& query_cloud,
                                    const RigidTransform& query_to_world,
                                    const PointCloud& target_cloud,
                                    const RigidTransform& target_to_world,
                                    const std::vector<double>& thresholds) {
  require(!matches.empty(), ErrorCode::NoRetainedMatches,
          "precision over an empty correspondence set is undefined");
  auto residuals = world_residuals(matches, query_cloud, query_to_world,
                                   target_cloud, target_to_world);
  std::vector<double> fractions;
  fractions.reserve(thresholds.size());
  for (double x : thresholds) {
    std::size_t hits = 0;
    for (const auto& m : residuals)
      if (m.distance <= x) ++hits;
    fractions.push_back(static_cast<double>(hits) /
                        static_cast<double>(matches.size()));
  }
  return fractions;
}

PcaModel fit_pca(const Eigen::MatrixXd& rows, int dim) {
  Eigen::Index n = rows.rows(), d = rows.cols();
  require(dim >= 1 && dim <= d, ErrorCode::InvalidArgument,
          "projection dimension out of range");
  require(n >= dim + 1, ErrorCode::InsufficientSamples,
          "need at least dim + 1 sample rows for the projection");

  PcaModel model;
  model.mean = rows.colwise().mean();
  Eigen::MatrixXd centered = rows.rowwise() - model.mean.transpose();

  Eigen::MatrixXd directions(d, dim);
  if (n >= d) {
    Eigen::MatrixXd cov =
        centered.transpose() * centered / static_cast<double>(n - 1);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
    require(eig.info() == Eigen::Success, ErrorCode::Unknown,
            "eigendecomposition failed");
    for (int k = 0; k < dim; ++k) directions.col(k) = eig.eigenvectors().col(d - 1 - k);
  } else {
    // Gram route: eigenvectors of the n x n Gram matrix lift to input space.
    Eigen::MatrixXd gram = centered * centered.transpose();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(gram);
    require(eig.info() == Eigen::Success, ErrorCode::Unknown,
            "eigendecomposition failed");
    for (int k = 0; k < dim; ++k) {
      double lambda = eig.eigenvalues()(n - 1 - k);
      require(lambda > 1e-12 * std::max(1.0, eig.eigenvalues()(n - 1)),
              ErrorCode::InsufficientSamples,
              "sample does not span the requested dimension");
      directions.col(k) =
          centered.transpose() * eig.eigenvectors().col(n - 1 - k) /
          std::sqrt(lambda);
      directions.col(k).normalize();
    }
  }

  model.components = directions.transpose();
  for (Eigen::Index row = 0; row < model.components.rows(); ++row) {
    Eigen::Index largest = 0;
    double best = 0.0;
    for (Eigen::Index col = 0; col < model.components.cols(); ++col) {
      double mag = std::abs(model.components(row, col));
      if (mag > best) {
        best = mag;
        largest = col;
      }
    }
    if (model.components(row, largest) < 0.0) model.components.row(row) *= -1.0;
  }
  return model;
}

FeatureSet project_pca(const PcaModel& model, const Eigen::MatrixXd& histograms,
                       const std::vector<char>& valid) {
  require(static_cast<std::size_t>(histograms.rows()) == valid.size(),
          ErrorCode::Shape, "validity flags do not match histogram rows");
  require(histograms.cols() == model.input_dim(), ErrorCode::Shape,
          "histogram dimension does not match the projection");
  FeatureSet out;
  out.dim = model.output_dim();
  for (std::size_t i = 0; i < valid.size(); ++i)
    if (valid[i]) out.indices.push_back(i);
  out.vectors =
      Eigen::MatrixXd(static_cast<Eigen::Index>(out.indices.size()), out.dim);
  for (std::size_t k = 0; k < out.indices.size(); ++k) {
    Eigen::VectorXd centered =
        histograms.row(static_cast<Eigen::Index>(out.indices[k])).transpose() -
        model.mean;
    out.vectors.row(static_cast<Eigen::Index>(k)) =
        (model.components * centered).transpose();
  }
  return out;
}

void save_pca(const PcaModel& model, const std::string& path) {
  require(model.components.size() > 0, ErrorCode::InvalidArgument,
          "cannot save an empty projection");
  std::ofstream out(path, std::ios::binary);
  require(out.good(), ErrorCode::Io, "cannot write: " + path);
  out << "CGF-PCA1\n";
  out << "dims: " << model.output_dim() << ' ' << model.input_dim() << '\n';
  out.write(reinterpret_cast<const char*>(model.mean.data()),
            static_cast<std::streamsize>(sizeof(double) * model.mean.size()));
  Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> c =
      model.components;
  out.write(reinterpret_cast<const char*>(c.data()),
            static_cast<std::streamsize>(sizeof(double) * c.size()));
  require(out.good(), ErrorCode::Io, "write failed: " + path);
}

PcaModel load_pca(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  require(in.good(), ErrorCode::Io, "cannot open: " + path);
  std::string magic;
  require(static_cast<bool>(std::getline(in, magic)) && magic == "CGF-PCA1",
          ErrorCode::ModelFormat, path + ": bad magic");
  std::string header;
  require(static_cast<bool>(std::getline(in, header)) &&
              header.rfind("dims:", 0) == 0,
          ErrorCode::ModelFormat, path + ": bad header line");
  std::istringstream dims(header.substr(5));
  int out_dim = 0, in_dim = 0;
  dims >> out_dim >> in_dim;
  require(!dims.fail() && out_dim >= 1 && in_dim >= 1 && out_dim <= in_dim,
          ErrorCode::ModelFormat, path + ": bad dimensions");
  PcaModel model;
  model.mean.resize(in_dim);
  in.read(reinterpret_cast<char*>(model.mean.data()),
          static_cast<std::streamsize>(sizeof(double) * in_dim));
  Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> c(
      out_dim, in_dim);
  in.read(reinterpret_cast<char*>(c.data()),
          static_cast<std::streamsize>(sizeof(double) * c.size()));
  require(in.gcount() ==
              static_cast<std::streamsize>(sizeof(double) * c.size()),
          ErrorCode::ModelFormat, path + ": truncated projection blob");
  model.components = c;
  char extra;
  require(!in.read(&extra, 1), ErrorCode::ModelFormat,
          path + ": trailing bytes");
  return model;
}

double time_queries(const FeatureSet& query, const FeatureSet& target,
                    int repeats) {
  require(repeats >= 1, ErrorCode::InvalidArgument,
          "repeat count must be at least 1");
  require(query.size() > 0, ErrorCode::InvalidArgument, "no query features");
  require(target.size() > 0, ErrorCode::EmptyTarget, "no target features");
  require(query.dim == target.dim, ErrorCode::Shape,
          "feature dimensions do not match");
  KdTree tree(target.vectors);
  volatile std::size_t sink = 0;
  Eigen::VectorXd q(query.dim);
  auto start = std::chrono::steady_clock::now();
  for (int rep = 0; rep < repeats; ++rep) {
    for (std::size_t i = 0; i < query.size(); ++i) {
      q = query.vectors.row(static_cast<Eigen::Index>(i));
      sink = sink + tree.nearest(q).index;
    }
  }
  auto stop = std::chrono::steady_clock::now();
  double total_ms =
      std::chrono::duration<double, std::milli>(stop - start).count();
  return total_ms / (static_cast<double>(repeats) *
                     static_cast<double>(query.size()));
}

void write_correspondences_csv(const std::vector<Correspondence>& matches,
                               const std::string& path) {
  std::ofstream out(path);
  require(out.good(), ErrorCode::Io, "cannot write: " + path);
  out << "query_idx,match_idx,residual\n";
  for (const auto& m : matches)
    out << m.query_index << ',' << m.match_index << ','
        << format_double(m.distance) << '\n';
  require(out.good(), ErrorCode::Io, "write failed: " + path);
}

std::vector<Correspondence> read_correspondences_csv(const std::string& path) {
  std::ifstream in(path);
  require(in.good(), ErrorCode::Io, "cannot open: " + path);
  std::string line;
  require(static_cast<bool>(std::getline(in, line)) &&
              line == "query_idx,match_idx,residual",
          ErrorCode::Parse, path + ": missing correspondence header");
  std::vector<Correspondence> out;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream row(line);
    std::string a, b, c;
    bool ok = static_cast<bool>(std::getline(row, a, ',')) &&
              static_cast<bool>(std::getline(row, b, ',')) &&
              static_cast<bool>(std::getline(row, c));
    require(ok, ErrorCode::Parse,
            path + ":" + std::to_string(line_no) + ": expected 3 columns");
    try {
      out.push_back({static_cast<std::size_t>(std::stoull(a)),
                     static_cast<std::size_t>(std::stoull(b)), std::stod(c)});
    } catch (const std::exception&) {
      throw_error(ErrorCode::Parse,
                  path + ":" + std::to_string(line_no) + ": bad numeric cell");
    }
  }
  return out;
}

void write_precision_csv(const std::vector<double>& thresholds,
                         const std::vector<double>& fractions,
                         const std::string& path) {
  require(thresholds.size() == fractions.size(), ErrorCode::Shape,
          "threshold and fraction counts differ");
  std::ofstream out(path);
  require(out.good(), ErrorCode::Io, "cannot write: " + path);
  out << "threshold,fraction\n";
  for (std::size_t i = 0; i < thresholds.size(); ++i)
    out << format_double(thresholds[i]) << ',' << format_double(fractions[i])
        << '\n';
  require(out.good(), ErrorCode::Io, "write failed: " + path);
}

}  // namespace cgf
