#pragma once

#include <cstddef>
#include <vector>

#include "cgf/geometry.hpp"

namespace cgf {

// Exact nearest-neighbor search over fixed-dimension points. Balanced
// median-split tree with full backtracking, so results match a brute-force
// scan exactly (ties broken toward the lower index).
class KdTree {
 public:
  KdTree() = default;

  // Rows of `data` are points; storage is transposed internally so each
  // point is contiguous.
  explicit KdTree(const Eigen::MatrixXd& data);
  explicit KdTree(const std::vector<Vec3>& points);

  std::size_t size() const { return static_cast<std::size_t>(data_.cols()); }
  int dim() const { return static_cast<int>(data_.rows()); }
  bool empty() const { return size() == 0; }

  struct Neighbor {
    std::size_t index;
    double distance;
  };

  Neighbor nearest(const Eigen::VectorXd& query) const;
  Neighbor nearest(const Vec3& query) const;

  // k nearest, ordered by (distance, index).
  std::vector<Neighbor> knn(const Eigen::VectorXd& query, std::size_t k) const;
  std::vector<Neighbor> knn(const Vec3& query, std::size_t k) const;

  // All points within the closed ball of the given radius, ordered by index.
  std::vector<std::size_t> radius(const Vec3& query, double r) const;
  std::vector<std::size_t> radius(const Eigen::VectorXd& query, double r) const;

 private:
  struct Node {
    int axis = -1;            // -1 marks a leaf
    double split = 0.0;
    std::size_t begin = 0;    // leaf: range into order_
    std::size_t end = 0;
    int left = -1;
    int right = -1;
  };

  void build();
  int build_range(std::size_t begin, std::size_t end);

  struct NearestState;
  void search_nearest(int node, const double* q, NearestState& state) const;

  struct KnnState;
  void search_knn(int node, const double* q, KnnState& state) const;

  void search_radius(int node, const double* q, double r2,
                     std::vector<std::size_t>& out) const;

  double sq_dist_bounded(const double* q, std::size_t point, double bound) const;

  Eigen::MatrixXd data_;  // dim x count, one point per column
  std::vector<std::size_t> order_;
  std::vector<Node> nodes_;
  int root_ = -1;
  static constexpr std::size_t kLeafSize = 16;
};

}  // namespace cgf
