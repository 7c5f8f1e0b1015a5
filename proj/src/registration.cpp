#include "cgf/registration.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>

#include <json.hpp>

#include "cgf/kdtree.hpp"
#include "cgf/util.hpp"

namespace cgf {

RigidTransform fit_rigid(const std::vector<Vec3>& source,
                         const std::vector<Vec3>& target) {
  require(source.size() == target.size(), ErrorCode::Shape,
          "source and target correspondence counts differ");
  require(source.size() >= 3, ErrorCode::DegenerateFit,
          "rigid fit needs at least 3 correspondences");

  Vec3 src_centroid = Vec3::Zero(), tgt_centroid = Vec3::Zero();
  for (std::size_t k = 0; k < source.size(); ++k) {
    src_centroid += source[k];
    tgt_centroid += target[k];
  }
  src_centroid /= static_cast<double>(source.size());
  tgt_centroid /= static_cast<double>(target.size());

  Mat3 cross = Mat3::Zero();
  for (std::size_t k = 0; k < source.size(); ++k)
    cross += (target[k] - tgt_centroid) * (source[k] - src_centroid).transpose();

  Eigen::JacobiSVD<Mat3> svd(cross, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Mat3& u = svd.matrixU();
  const Mat3& v = svd.matrixV();
  double smallest = svd.singularValues()(2);
  double largest = svd.singularValues()(0);
  require(largest > 0.0 && svd.singularValues()(1) > 1e-12 * largest,
          ErrorCode::DegenerateFit,
          "correspondences are collinear; rotation is not determined");
  (void)smallest;

  Mat3 d = Mat3::Identity();
  if ((u * v.transpose()).determinant() < 0.0) d(2, 2) = -1.0;
  RigidTransform out;
  out.rotation = u * d * v.transpose();
  out.translation = tgt_centroid - out.rotation * src_centroid;
  return out;
}

namespace {

struct CorrespondencePoints {
  std::vector<Vec3> source;
  std::vector<Vec3> target;
};

CorrespondencePoints gather(const std::vector<Correspondence>& matches,
                            const PointCloud& source, const PointCloud& target) {
  CorrespondencePoints out;
  out.source.reserve(matches.size());
  out.target.reserve(matches.size());
  for (const auto& m : matches) {
    require(m.query_index < source.size() && m.match_index < target.size(),
            ErrorCode::InvalidArgument, "correspondence index out of range");
    out.source.push_back(source.points[m.query_index]);
    out.target.push_back(target.points[m.match_index]);
  }
  return out;
}

std::vector<std::size_t> consensus_set(const CorrespondencePoints& pts,
                                       const RigidTransform& t, double tol) {
  std::vector<std::size_t> inliers;
  for (std::size_t k = 0; k < pts.source.size(); ++k)
    if ((t.apply(pts.source[k]) - pts.target[k]).norm() <= tol)
      inliers.push_back(k);
  return inliers;
}

double consensus_rms(const CorrespondencePoints& pts,
                     const std::vector<std::size_t>& inliers,
                     const RigidTransform& t) {
  double sum = 0.0;
  for (auto k : inliers)
    sum += (t.apply(pts.source[k]) - pts.target[k]).squaredNorm();
  return std::sqrt(sum / static_cast<double>(inliers.size()));
}

}  // namespace

RigidTransform ransac_rigid(const std::vector<Correspondence>& matches,
                            const PointCloud& source, const PointCloud& target,
                            const RansacConfig& config,
                            std::size_t* inliers_out) {
  require(config.inlier_threshold > 0.0, ErrorCode::InvalidArgument,
          "inlier threshold must be positive");
  require(config.sample_size >= 3, ErrorCode::InvalidArgument,
          "sample size must be at least 3");
  require(matches.size() >= 3, ErrorCode::DegenerateFit,
          "need at least 3 correspondences");
  CorrespondencePoints pts = gather(matches, source, target);

  std::mt19937_64 rng(config.seed);
  std::uniform_int_distribution<std::size_t> pick(0, matches.size() - 1);

  bool found = false;
  RigidTransform best;
  std::size_t best_count = 0;
  double best_rms = 0.0;

  std::vector<Vec3> sample_src(static_cast<std::size_t>(config.sample_size));
  std::vector<Vec3> sample_tgt(static_cast<std::size_t>(config.sample_size));
  for (int iter = 0; iter < config.iterations; ++iter) {
    for (int k = 0; k < config.sample_size; ++k) {
      std::size_t idx = pick(rng);
      sample_src[static_cast<std::size_t>(k)] = pts.source[idx];
      sample_tgt[static_cast<std::size_t>(k)] = pts.target[idx];
    }
    RigidTransform candidate;
    try {
      candidate = fit_rigid(sample_src, sample_tgt);
    } catch (const Error& e) {
      if (e.code() == ErrorCode::DegenerateFit) continue;
      throw;
    }
    auto inliers = consensus_set(pts, candidate, config.inlier_threshold);
    if (inliers.size() < 3) continue;
    double rms = consensus_rms(pts, inliers, candidate);
    if (!found || inliers.size() > best_count ||
        (inliers.size() == best_count && rms < best_rms)) {
      found = true;
      best = candidate;
      best_count = inliers.size();
      best_rms = rms;
    }
  }
  require(found, ErrorCode::NoConsensus,
          "no sampled model reached a 3-correspondence consensus");

  // Refit on the best consensus set; keep the refit only if it does not lose
  // inliers.
  auto best_inliers = consensus_set(pts, best, config.inlier_threshold);
  std::vector<Vec3> in_src, in_tgt;
  for (auto k : best_inliers) {
    in_src.push_back(pts.source[k]);
    in_tgt.push_back(pts.target[k]);
  }
  try {
    RigidTransform refit = fit_rigid(in_src, in_tgt);
    auto refit_inliers = consensus_set(pts, refit, config.inlier_threshold);
    if (refit_inliers.size() >= best_inliers.size()) {
      best = refit;
      best_inliers = refit_inliers;
    }
  } catch (const Error& e) {
    if (e.code() != ErrorCode::DegenerateFit) throw;
  }
  if (inliers_out) *inliers_out = best_inliers.size();
  return best;
}

double registration_rmse(const RigidTransform& estimated,
                         const PointCloud& source,
                         const RigidTransform& source_to_world,
                         const PointCloud& target,
                         const RigidTransform& target_to_world, double gt_tau) {
  require(gt_tau > 0.0, ErrorCode::InvalidArgument, "gt tau must be positive");
  source.validate();
  target.validate();
  std::vector<Vec3> target_world(target.size());
  for (std::size_t k = 0; k < target.size(); ++k)
    target_world[k] = target_to_world.apply(target.points[k]);
  KdTree tree(target_world);

  double sum = 0.0;
  std::size_t count = 0;
  for (std::size_t k = 0; k < source.size(); ++k) {
    Vec3 world = source_to_world.apply(source.points[k]);
    auto nn = tree.nearest(world);
    if (nn.distance > gt_tau) continue;
    Vec3 predicted = estimated.apply(source.points[k]);
    sum += (predicted - target.points[nn.index]).squaredNorm();
    ++count;
  }
  require(count > 0, ErrorCode::NoGroundTruth,
          "no source point has a ground-truth counterpart within gt tau");
  return std::sqrt(sum / static_cast<double>(count));
}

RegistrationResult register_pair(const std::vector<Correspondence>& matches,
                                 const PointCloud& source,
                                 const RigidTransform& source_to_world,
                                 const PointCloud& target,
                                 const RigidTransform& target_to_world,
                                 const RegistrationConfig& config) {
  require(config.success_rmse > 0.0, ErrorCode::InvalidArgument,
          "success threshold must be positive");
  RegistrationResult result;
  result.transform = ransac_rigid(matches, source, target, config.ransac,
                                  &result.inliers);
  result.rmse = registration_rmse(result.transform, source, source_to_world,
                                  target, target_to_world, config.gt_tau);
  result.success = result.rmse <= config.success_rmse;
  return result;
}

void write_registration_json(const RegistrationResult& result,
                             const std::string& path) {
  nlohmann::json j;
  j["rotation"] = std::vector<double>{
      result.transform.rotation(0, 0), result.transform.rotation(0, 1),
      result.transform.rotation(0, 2), result.transform.rotation(1, 0),
      result.transform.rotation(1, 1), result.transform.rotation(1, 2),
      result.transform.rotation(2, 0), result.transform.rotation(2, 1),
      result.transform.rotation(2, 2)};
  j["translation"] = std::vector<double>{result.transform.translation.x(),
                                         result.transform.translation.y(),
                                         result.transform.translation.z()};
  j["rmse"] = result.rmse;
  j["inliers"] = result.inliers;
  j["success"] = result.success;
  std::ofstream out(path);
  require(out.good(), ErrorCode::Io, "cannot write: " + path);
  out << j.dump(2) << '\n';
  require(out.good(), ErrorCode::Io, "write failed: " + path);
}

RegistrationResult read_registration_json(const std::string& path) {
  std::ifstream in(path);
  require(in.good(), ErrorCode::Io, "cannot open: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw_error(ErrorCode::Parse, path + ": " + e.what());
  }
  RegistrationResult result;
  try {
    auto rot = j.at("rotation").get<std::vector<double>>();
    auto tr = j.at("translation").get<std::vector<double>>();
    require(rot.size() == 9 && tr.size() == 3, ErrorCode::Parse,
            path + ": bad rotation/translation arrays");
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 3; ++c)
        result.transform.rotation(r, c) = rot[static_cast<std::size_t>(3 * r + c)];
    result.transform.translation =
        Vec3(tr[0], tr[1], tr[2]);
    result.rmse = j.at("rmse").get<double>();
    result.inliers = j.at("inliers").get<std::size_t>();
    result.success = j.at("success").get<bool>();
  } catch (const nlohmann::json::exception& e) {
    throw_error(ErrorCode::Parse, path + ": " + e.what());
  }
  return result;
}

}  // namespace cgf
