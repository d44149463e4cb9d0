#pragma once

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

#include "mvreg/error.hpp"
#include "mvreg/point_cloud.hpp"

namespace mvreg {

struct Neighbor {
  std::size_t index = 0;
  double distance = 0.0;
};

/// Exact nearest-neighbor index over an immutable snapshot of a cloud.
/// Results are identical to a brute-force scan: the minimum is taken over
/// (squared distance, point index) lexicographically, so ties resolve to the
/// smallest index. Queries are safe to run concurrently.
class NeighborIndex {
 public:
  explicit NeighborIndex(const PointCloud& cloud) : points_(cloud.points) {
    if (points_.empty()) {
      throw Error("EmptyCloud", "cannot index an empty cloud");
    }
    order_.resize(points_.size());
    for (std::uint32_t i = 0; i < order_.size(); ++i) order_[i] = i;
    nodes_.reserve(2 * points_.size() / kLeafSize + 2);
    build(0, static_cast<std::uint32_t>(points_.size()));
  }

  std::size_t size() const { return points_.size(); }
  const std::vector<Eigen::Vector3d>& points() const { return points_; }

  Neighbor nearest(const Eigen::Vector3d& query) const {
    return search(query, kNoExclusion);
  }

  /// Nearest neighbor with one indexed point excluded; used for queries of
  /// the cloud against itself.
  Neighbor nearest_excluding(const Eigen::Vector3d& query,
                             std::size_t excluded) const {
    return search(query, excluded);
  }

 private:
  static constexpr std::uint32_t kLeafSize = 8;
  static constexpr std::size_t kNoExclusion =
      std::numeric_limits<std::size_t>::max();

  struct Node {
    double split = 0.0;
    std::int32_t axis = -1;  // -1 marks a leaf
    std::uint32_t left = 0;  // child node ids, or [begin,end) into order_
    std::uint32_t right = 0;
  };

  std::uint32_t build(std::uint32_t begin, std::uint32_t end) {
    const std::uint32_t id = static_cast<std::uint32_t>(nodes_.size());
    nodes_.emplace_back();
    if (end - begin <= kLeafSize) {
      nodes_[id].axis = -1;
      nodes_[id].left = begin;
      nodes_[id].right = end;
      return id;
    }
    Eigen::Vector3d lo = points_[order_[begin]];
    Eigen::Vector3d hi = lo;
    for (std::uint32_t k = begin + 1; k < end; ++k) {
      lo = lo.cwiseMin(points_[order_[k]]);
      hi = hi.cwiseMax(points_[order_[k]]);
    }
    int axis = 0;
    (hi - lo).maxCoeff(&axis);
    const std::uint32_t mid = begin + (end - begin) / 2;
    std::nth_element(order_.begin() + begin, order_.begin() + mid,
                     order_.begin() + end,
                     [&](std::uint32_t a, std::uint32_t b) {
                       const double ca = points_[a](axis);
                       const double cb = points_[b](axis);
                       return ca < cb || (ca == cb && a < b);
                     });
    const double split = points_[order_[mid]](axis);
    const std::uint32_t left = build(begin, mid);
    const std::uint32_t right = build(mid, end);
    nodes_[id].axis = axis;
    nodes_[id].split = split;
    nodes_[id].left = left;
    nodes_[id].right = right;
    return id;
  }

  Neighbor search(const Eigen::Vector3d& query, std::size_t excluded) const {
    double best_d2 = std::numeric_limits<double>::infinity();
    std::size_t best_idx = kNoExclusion;
    descend(0, query, excluded, best_d2, best_idx);
    return Neighbor{best_idx, std::sqrt(best_d2)};
  }

  void descend(std::uint32_t node_id, const Eigen::Vector3d& query,
               std::size_t excluded, double& best_d2,
               std::size_t& best_idx) const {
    const Node& node = nodes_[node_id];
    if (node.axis < 0) {
      for (std::uint32_t k = node.left; k < node.right; ++k) {
        const std::uint32_t idx = order_[k];
        if (idx == excluded) continue;
        const double d2 = (points_[idx] - query).squaredNorm();
        if (d2 < best_d2 || (d2 == best_d2 && idx < best_idx)) {
          best_d2 = d2;
          best_idx = idx;
        }
      }
      return;
    }
    const double diff = query(node.axis) - node.split;
    const std::uint32_t near = diff < 0.0 ? node.left : node.right;
    const std::uint32_t far = diff < 0.0 ? node.right : node.left;
    descend(near, query, excluded, best_d2, best_idx);
    // The far side may still hold an equal-distance point with a smaller
    // index, so only prune on strict inequality.
    if (diff * diff <= best_d2) {
      descend(far, query, excluded, best_d2, best_idx);
    }
  }

  std::vector<Eigen::Vector3d> points_;
  std::vector<std::uint32_t> order_;
  std::vector<Node> nodes_;
};

/// Mean squared distance from each indexed point to its nearest neighbor in
/// the same cloud (self excluded); the paper's point-resolution statistic Qe.
inline double self_resolution(const NeighborIndex& index) {
  const std::size_t n = index.size();
  if (n < 2) {
    throw Error("TooFewPoints", "resolution needs at least 2 points");
  }
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const Neighbor nb = index.nearest_excluding(index.points()[i], i);
    sum += nb.distance * nb.distance;
  }
  return sum / static_cast<double>(n);
}

}  // namespace mvreg
