#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <queue>
#include <vector>

#include "mapless/types.hpp"

namespace mapless {

struct Neighbor {
  std::size_t index = 0;
  double distance = 0.0;
};

// Static k-d tree over a fixed point set. Nearest-neighbour results are exact;
// among equidistant points the lowest input index wins, so results coincide
// with a linear scan.
class KdTree {
 public:
  KdTree() = default;
  explicit KdTree(std::vector<Vec3> points, std::size_t leaf_size = 8);

  bool empty() const { return points_.empty(); }
  std::size_t size() const { return points_.size(); }
  const std::vector<Vec3>& points() const { return points_; }

  std::optional<Neighbor> nearest(const Vec3& query) const;
  // Nearest point strictly closer than `radius`, if any (same tie-break).
  std::optional<Neighbor> nearest_within(const Vec3& query, double radius) const;
  // Up to k neighbours sorted by (distance, index).
  std::vector<Neighbor> knn(const Vec3& query, std::size_t k) const;

 private:
  struct Node {
    std::uint32_t begin = 0;
    std::uint32_t end = 0;
    std::int32_t left = -1;
    std::int32_t right = -1;
    int dim = 0;
    double split = 0.0;
  };

  std::int32_t build(std::uint32_t begin, std::uint32_t end);
  // `rd` is the squared distance from q to the node's cell implied by the
  // split planes crossed so far, `off` the per-axis components of it.
  void search_nearest(std::int32_t node, const Vec3& q, double rd, double* off, std::size_t& best,
                      double& best_sq) const;

  template <class Heap>
  void search_knn(std::int32_t node, const Vec3& q, double rd, double* off, std::size_t k, Heap& heap) const;

  std::vector<Vec3> points_;
  std::vector<Vec3> ordered_;
  std::vector<std::uint32_t> order_;
  std::vector<Node> nodes_;
  std::size_t leaf_size_ = 8;
};

// Insert-only nearest-neighbour index built from static trees of power-of-two
// sizes (logarithmic method). Neighbour indices are insertion ids.
class DynamicKdTree {
 public:
  void insert(const Vec3& point);
  std::size_t size() const { return points_.size(); }
  const std::vector<Vec3>& points() const { return points_; }
  std::vector<Neighbor> knn(const Vec3& query, std::size_t k) const;

 private:
  struct Level {
    KdTree tree;
    std::vector<std::size_t> ids;
  };
  std::vector<Vec3> points_;
  std::vector<std::optional<Level>> levels_;
};

// ---------------------------------------------------------------------------

namespace detail {
inline bool neighbor_less(const Neighbor& a, const Neighbor& b) {
  return a.distance < b.distance || (a.distance == b.distance && a.index < b.index);
}
}  // namespace detail

inline KdTree::KdTree(std::vector<Vec3> points, std::size_t leaf_size)
    : points_(std::move(points)), leaf_size_(std::max<std::size_t>(leaf_size, 1)) {
  order_.resize(points_.size());
  for (std::uint32_t i = 0; i < order_.size(); ++i) order_[i] = i;
  if (!points_.empty()) {
    nodes_.reserve(2 * points_.size() / leaf_size_ + 2);
    build(0, static_cast<std::uint32_t>(points_.size()));
  }
  ordered_.resize(points_.size());
  for (std::size_t i = 0; i < order_.size(); ++i) ordered_[i] = points_[order_[i]];
}

inline std::int32_t KdTree::build(std::uint32_t begin, std::uint32_t end) {
  const auto id = static_cast<std::int32_t>(nodes_.size());
  nodes_.push_back(Node{begin, end});
  if (end - begin <= leaf_size_) return id;

  Vec3 lo = Vec3::Constant(std::numeric_limits<double>::infinity());
  Vec3 hi = -lo;
  for (std::uint32_t i = begin; i < end; ++i) {
    lo = lo.cwiseMin(points_[order_[i]]);
    hi = hi.cwiseMax(points_[order_[i]]);
  }
  int dim = 0;
  (hi - lo).maxCoeff(&dim);
  if (hi[dim] <= lo[dim]) return id;  // all points coincide

  const std::uint32_t mid = begin + (end - begin) / 2;
  std::nth_element(order_.begin() + begin, order_.begin() + mid, order_.begin() + end,
                   [&](std::uint32_t a, std::uint32_t b) { return points_[a][dim] < points_[b][dim]; });
  const double split = points_[order_[mid]][dim];
  const std::int32_t left = build(begin, mid);
  const std::int32_t right = build(mid, end);
  nodes_[id].left = left;
  nodes_[id].right = right;
  nodes_[id].dim = dim;
  nodes_[id].split = split;
  return id;
}

inline constexpr std::size_t kNone = std::numeric_limits<std::size_t>::max();

inline void KdTree::search_nearest(std::int32_t node_id, const Vec3& q, double rd, double* off, std::size_t& best,
                                   double& best_sq) const {
  const Node& node = nodes_[node_id];
  if (node.left < 0) {
    for (std::uint32_t i = node.begin; i < node.end; ++i) {
      const double d2 = (ordered_[i] - q).squaredNorm();
      if (d2 < best_sq || (d2 == best_sq && best != kNone && order_[i] < best)) {
        best_sq = d2;
        best = order_[i];
      }
    }
    return;
  }
  const double diff = q[node.dim] - node.split;
  const std::int32_t near = diff < 0.0 ? node.left : node.right;
  const std::int32_t far = diff < 0.0 ? node.right : node.left;
  search_nearest(near, q, rd, off, best, best_sq);
  const double old = off[node.dim];
  const double far_rd = rd - old * old + diff * diff;
  if (far_rd <= best_sq) {
    off[node.dim] = diff;
    search_nearest(far, q, far_rd, off, best, best_sq);
    off[node.dim] = old;
  }
}

inline std::optional<Neighbor> KdTree::nearest(const Vec3& query) const {
  if (points_.empty()) return std::nullopt;
  std::size_t best = std::numeric_limits<std::size_t>::max();
  double best_sq = std::numeric_limits<double>::infinity();
  double off[3] = {0.0, 0.0, 0.0};
  search_nearest(0, query, 0.0, off, best, best_sq);
  return Neighbor{best, std::sqrt(best_sq)};
}

inline std::optional<Neighbor> KdTree::nearest_within(const Vec3& query, double radius) const {
  if (points_.empty()) return std::nullopt;
  std::size_t best = std::numeric_limits<std::size_t>::max();
  double best_sq = radius * radius;
  double off[3] = {0.0, 0.0, 0.0};
  search_nearest(0, query, 0.0, off, best, best_sq);
  if (best == std::numeric_limits<std::size_t>::max()) return std::nullopt;
  return Neighbor{best, std::sqrt(best_sq)};
}

template <class Heap>
void KdTree::search_knn(std::int32_t node_id, const Vec3& q, double rd, double* off, std::size_t k,
                        Heap& heap) const {
  const Node& node = nodes_[node_id];
  if (node.left < 0) {
    for (std::uint32_t i = node.begin; i < node.end; ++i) {
      const Neighbor cand{order_[i], (ordered_[i] - q).squaredNorm()};
      if (heap.size() < k) {
        heap.push(cand);
      } else if (detail::neighbor_less(cand, heap.top())) {
        heap.pop();
        heap.push(cand);
      }
    }
    return;
  }
  const double diff = q[node.dim] - node.split;
  const std::int32_t near = diff < 0.0 ? node.left : node.right;
  const std::int32_t far = diff < 0.0 ? node.right : node.left;
  search_knn(near, q, rd, off, k, heap);
  const double old = off[node.dim];
  const double far_rd = rd - old * old + diff * diff;
  if (heap.size() < k || far_rd <= heap.top().distance) {
    off[node.dim] = diff;
    search_knn(far, q, far_rd, off, k, heap);
    off[node.dim] = old;
  }
}

inline std::vector<Neighbor> KdTree::knn(const Vec3& query, std::size_t k) const {
  std::vector<Neighbor> out;
  if (points_.empty() || k == 0) return out;
  // max-heap on (squared distance, index)
  auto cmp = [](const Neighbor& a, const Neighbor& b) { return detail::neighbor_less(a, b); };
  std::priority_queue<Neighbor, std::vector<Neighbor>, decltype(cmp)> heap(cmp);
  double off[3] = {0.0, 0.0, 0.0};
  search_knn(0, query, 0.0, off, k, heap);
  out.reserve(heap.size());
  while (!heap.empty()) {
    out.push_back(heap.top());
    heap.pop();
  }
  std::reverse(out.begin(), out.end());
  for (auto& n : out) n.distance = std::sqrt(n.distance);
  return out;
}

inline void DynamicKdTree::insert(const Vec3& point) {
  std::vector<std::size_t> carry{points_.size()};
  points_.push_back(point);
  for (std::size_t level = 0;; ++level) {
    if (level == levels_.size()) levels_.emplace_back();
    auto& slot = levels_[level];
    if (!slot) {
      std::vector<Vec3> pts;
      pts.reserve(carry.size());
      for (std::size_t id : carry) pts.push_back(points_[id]);
      slot = Level{KdTree(std::move(pts)), std::move(carry)};
      return;
    }
    carry.insert(carry.end(), slot->ids.begin(), slot->ids.end());
    slot.reset();
  }
}

inline std::vector<Neighbor> DynamicKdTree::knn(const Vec3& query, std::size_t k) const {
  std::vector<Neighbor> all;
  for (const auto& level : levels_) {
    if (!level) continue;
    for (const Neighbor& n : level->tree.knn(query, k)) all.push_back({level->ids[n.index], n.distance});
  }
  std::sort(all.begin(), all.end(), detail::neighbor_less);
  if (all.size() > k) all.resize(k);
  return all;
}

}  // namespace mapless
