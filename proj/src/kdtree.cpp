#include "cgf/kdtree.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace cgf {

KdTree::KdTree(const Eigen::MatrixXd& data) : data_(data.transpose()) { build(); }

KdTree::KdTree(const std::vector<Vec3>& points) {
  data_.resize(3, static_cast<Eigen::Index>(points.size()));
  for (std::size_t i = 0; i < points.size(); ++i)
    data_.col(static_cast<Eigen::Index>(i)) = points[i];
  build();
}

void KdTree::build() {
  order_.resize(size());
  std::iota(order_.begin(), order_.end(), std::size_t{0});
  nodes_.clear();
  if (!empty()) root_ = build_range(0, size());
}

int KdTree::build_range(std::size_t begin, std::size_t end) {
  int id = static_cast<int>(nodes_.size());
  nodes_.emplace_back();
  if (end - begin <= kLeafSize) {
    nodes_[id].begin = begin;
    nodes_[id].end = end;
    return id;
  }
  int axis = 0;
  double best_spread = -1.0;
  for (int a = 0; a < dim(); ++a) {
    double lo = data_(a, static_cast<Eigen::Index>(order_[begin]));
    double hi = lo;
    for (std::size_t i = begin + 1; i < end; ++i) {
      double v = data_(a, static_cast<Eigen::Index>(order_[i]));
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
    if (hi - lo > best_spread) {
      best_spread = hi - lo;
      axis = a;
    }
  }
  if (best_spread <= 0.0) {  // all points coincide
    nodes_[id].begin = begin;
    nodes_[id].end = end;
    return id;
  }
  std::size_t mid = begin + (end - begin) / 2;
  auto key = [&](std::size_t idx) {
    return std::make_pair(data_(axis, static_cast<Eigen::Index>(idx)), idx);
  };
  std::nth_element(order_.begin() + static_cast<std::ptrdiff_t>(begin),
                   order_.begin() + static_cast<std::ptrdiff_t>(mid),
                   order_.begin() + static_cast<std::ptrdiff_t>(end),
                   [&](std::size_t a, std::size_t b) { return key(a) < key(b); });
  double split = data_(axis, static_cast<Eigen::Index>(order_[mid]));
  int left = build_range(begin, mid);
  int right = build_range(mid, end);
  nodes_[id].axis = axis;
  nodes_[id].split = split;
  nodes_[id].left = left;
  nodes_[id].right = right;
  return id;
}

double KdTree::sq_dist_bounded(const double* q, std::size_t point,
                               double bound) const {
  const double* p = data_.data() + static_cast<std::ptrdiff_t>(point) * dim();
  const int d = dim();
  double sum = 0.0;
  int i = 0;
  for (; i + 8 <= d; i += 8) {
    for (int j = 0; j < 8; ++j) {
      double diff = q[i + j] - p[i + j];
      sum += diff * diff;
    }
    if (sum > bound) return sum;
  }
  for (; i < d; ++i) {
    double diff = q[i] - p[i];
    sum += diff * diff;
  }
  return sum;
}

struct KdTree::NearestState {
  double best_d2 = std::numeric_limits<double>::infinity();
  std::size_t best_index = 0;
  bool found = false;
};

void KdTree::search_nearest(int node, const double* q, NearestState& state) const {
  const Node& n = nodes_[static_cast<std::size_t>(node)];
  if (n.axis < 0) {
    for (std::size_t i = n.begin; i < n.end; ++i) {
      std::size_t idx = order_[i];
      double d2 = sq_dist_bounded(q, idx, state.best_d2);
      if (!state.found || d2 < state.best_d2 ||
          (d2 == state.best_d2 && idx < state.best_index)) {
        state.best_d2 = d2;
        state.best_index = idx;
        state.found = true;
      }
    }
    return;
  }
  double diff = q[n.axis] - n.split;
  int near = diff < 0.0 ? n.left : n.right;
  int far = diff < 0.0 ? n.right : n.left;
  search_nearest(near, q, state);
  if (diff * diff <= state.best_d2) search_nearest(far, q, state);
}

KdTree::Neighbor KdTree::nearest(const Eigen::VectorXd& query) const {
  require(!empty(), ErrorCode::EmptyTarget,
          "nearest-neighbor query against an empty set");
  require(query.size() == dim(), ErrorCode::Shape,
          "query dimension does not match indexed points");
  NearestState state;
  search_nearest(root_, query.data(), state);
  return {state.best_index, std::sqrt(state.best_d2)};
}

KdTree::Neighbor KdTree::nearest(const Vec3& query) const {
  return nearest(Eigen::VectorXd(query));
}

struct KdTree::KnnState {
  // Max-heap on (distance, index); top is the current worst of the k best.
  std::vector<std::pair<double, std::size_t>> heap;
  std::size_t k = 0;

  double bound() const {
    return heap.size() == k ? heap.front().first
                            : std::numeric_limits<double>::infinity();
  }
};

void KdTree::search_knn(int node, const double* q, KnnState& state) const {
  const Node& n = nodes_[static_cast<std::size_t>(node)];
  if (n.axis < 0) {
    for (std::size_t i = n.begin; i < n.end; ++i) {
      std::size_t idx = order_[i];
      double d2 = sq_dist_bounded(q, idx, state.bound());
      std::pair<double, std::size_t> cand(d2, idx);
      if (state.heap.size() < state.k) {
        state.heap.push_back(cand);
        std::push_heap(state.heap.begin(), state.heap.end());
      } else if (cand < state.heap.front()) {
        std::pop_heap(state.heap.begin(), state.heap.end());
        state.heap.back() = cand;
        std::push_heap(state.heap.begin(), state.heap.end());
      }
    }
    return;
  }
  double diff = q[n.axis] - n.split;
  int near = diff < 0.0 ? n.left : n.right;
  int far = diff < 0.0 ? n.right : n.left;
  search_knn(near, q, state);
  if (state.heap.size() < state.k || diff * diff <= state.heap.front().first)
    search_knn(far, q, state);
}

std::vector<KdTree::Neighbor> KdTree::knn(const Eigen::VectorXd& query,
                                          std::size_t k) const {
  require(query.size() == dim(), ErrorCode::Shape,
          "query dimension does not match indexed points");
  if (k == 0) return {};
  require(!empty(), ErrorCode::EmptyTarget,
          "nearest-neighbor query against an empty set");
  KnnState state;
  state.k = std::min(k, size());
  state.heap.reserve(state.k);
  search_knn(root_, query.data(), state);
  std::sort(state.heap.begin(), state.heap.end());
  std::vector<Neighbor> out;
  out.reserve(state.heap.size());
  for (const auto& [d2, idx] : state.heap) out.push_back({idx, std::sqrt(d2)});
  return out;
}

std::vector<KdTree::Neighbor> KdTree::knn(const Vec3& query, std::size_t k) const {
  return knn(Eigen::VectorXd(query), k);
}

void KdTree::search_radius(int node, const double* q, double r2,
                           std::vector<std::size_t>& out) const {
  const Node& n = nodes_[static_cast<std::size_t>(node)];
  if (n.axis < 0) {
    for (std::size_t i = n.begin; i < n.end; ++i) {
      std::size_t idx = order_[i];
      if (sq_dist_bounded(q, idx, r2) <= r2) out.push_back(idx);
    }
    return;
  }
  double diff = q[n.axis] - n.split;
  int near = diff < 0.0 ? n.left : n.right;
  int far = diff < 0.0 ? n.right : n.left;
  search_radius(near, q, r2, out);
  if (diff * diff <= r2) search_radius(far, q, r2, out);
}

std::vector<std::size_t> KdTree::radius(const Eigen::VectorXd& query,
                                        double r) const {
  require(query.size() == dim(), ErrorCode::Shape,
          "query dimension does not match indexed points");
  require(r >= 0.0, ErrorCode::InvalidRadius, "radius must be non-negative");
  std::vector<std::size_t> out;
  if (empty()) return out;
  search_radius(root_, query.data(), r * r, out);
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<std::size_t> KdTree::radius(const Vec3& query, double r) const {
  return radius(Eigen::VectorXd(query), r);
}

}  // namespace cgf
