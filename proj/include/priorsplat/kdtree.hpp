#pragma once

#include <algorithm>
#include <limits>
#include <numeric>
#include <utility>
#include <vector>

#include "priorsplat/common.hpp"

namespace priorsplat {

// Static 3-D k-d tree over a copy of the input points. Queries are const and
// thread-safe.
class KdTree {
 public:
  KdTree() = default;
  explicit KdTree(std::vector<Vec3> points) : points_(std::move(points)) {
    index_.resize(points_.size());
    std::iota(index_.begin(), index_.end(), 0);
    if (!points_.empty()) {
      nodes_.reserve(2 * points_.size() / kLeafSize + 2);
      build(0, static_cast<int>(points_.size()));
    }
  }

  size_t size() const { return points_.size(); }
  const std::vector<Vec3>& points() const { return points_; }

  // Index and squared distance of the nearest point (-1 when empty).
  std::pair<int, double> nearest(const Vec3& q) const {
    int best = -1;
    double best_d2 = std::numeric_limits<double>::infinity();
    if (!nodes_.empty()) nearest_rec(0, q, best, best_d2);
    return {best, best_d2};
  }

  // Up to k nearest points as (squared distance, index), ascending.
  std::vector<std::pair<double, int>> knn(const Vec3& q, size_t k) const {
    std::vector<std::pair<double, int>> heap;
    if (k == 0 || nodes_.empty()) return heap;
    heap.reserve(k + 1);
    knn_rec(0, q, k, heap);
    std::sort_heap(heap.begin(), heap.end());
    return heap;
  }

  // Indices with squared distance <= r^2, ascending by index.
  std::vector<int> radius(const Vec3& q, double r) const {
    std::vector<int> out;
    if (!nodes_.empty()) radius_rec(0, q, r * r, out);
    std::sort(out.begin(), out.end());
    return out;
  }

  // Indices within distance r of the segment [a, b], ascending by index.
  std::vector<int> capsule(const Vec3& a, const Vec3& b, double r) const {
    std::vector<int> out;
    if (!nodes_.empty()) capsule_rec(0, a, b, r, out);
    std::sort(out.begin(), out.end());
    return out;
  }

 private:
  static constexpr int kLeafSize = 8;

  struct Node {
    int begin = 0, end = 0;
    int left = -1, right = -1;
    int dim = -1;  // -1 for leaves
    double split = 0;
    Vec3 lo = Vec3::Zero(), hi = Vec3::Zero();
  };

  static double segment_distance2(const Vec3& p, const Vec3& a, const Vec3& b) {
    const Vec3 ab = b - a;
    const double len2 = ab.squaredNorm();
    const double t = len2 > 0 ? std::clamp((p - a).dot(ab) / len2, 0.0, 1.0) : 0.0;
    return (a + t * ab - p).squaredNorm();
  }

  int build(int begin, int end) {
    const int id = static_cast<int>(nodes_.size());
    nodes_.push_back(Node{begin, end});
    Vec3 lo = Vec3::Constant(std::numeric_limits<double>::infinity());
    Vec3 hi = -lo;
    for (int i = begin; i < end; ++i) {
      lo = lo.cwiseMin(points_[index_[i]]);
      hi = hi.cwiseMax(points_[index_[i]]);
    }
    nodes_[id].lo = lo;
    nodes_[id].hi = hi;
    if (end - begin <= kLeafSize) return id;
    int dim = 0;
    const Vec3 ext = hi - lo;
    if (ext.y() > ext[dim]) dim = 1;
    if (ext.z() > ext[dim]) dim = 2;
    if (ext[dim] <= 0) return id;
    const int mid = (begin + end) / 2;
    std::nth_element(index_.begin() + begin, index_.begin() + mid, index_.begin() + end,
                     [&](int a, int b) { return points_[a][dim] < points_[b][dim]; });
    const double split = points_[index_[mid]][dim];
    const int l = build(begin, mid);
    const int r = build(mid, end);
    nodes_[id].dim = dim;
    nodes_[id].split = split;
    nodes_[id].left = l;
    nodes_[id].right = r;
    return id;
  }

  void nearest_rec(int id, const Vec3& q, int& best, double& best_d2) const {
    const Node& n = nodes_[id];
    if (n.dim < 0) {
      for (int i = n.begin; i < n.end; ++i) {
        const int p = index_[i];
        const double d2 = (points_[p] - q).squaredNorm();
        if (d2 < best_d2 || (d2 == best_d2 && p < best)) {
          best_d2 = d2;
          best = p;
        }
      }
      return;
    }
    const double diff = q[n.dim] - n.split;
    const int first = diff < 0 ? n.left : n.right;
    const int second = diff < 0 ? n.right : n.left;
    nearest_rec(first, q, best, best_d2);
    if (diff * diff <= best_d2) nearest_rec(second, q, best, best_d2);
  }

  void knn_rec(int id, const Vec3& q, size_t k, std::vector<std::pair<double, int>>& heap) const {
    const Node& n = nodes_[id];
    if (n.dim < 0) {
      for (int i = n.begin; i < n.end; ++i) {
        const int p = index_[i];
        const std::pair<double, int> cand((points_[p] - q).squaredNorm(), p);
        if (heap.size() < k) {
          heap.push_back(cand);
          std::push_heap(heap.begin(), heap.end());
        } else if (cand < heap.front()) {
          std::pop_heap(heap.begin(), heap.end());
          heap.back() = cand;
          std::push_heap(heap.begin(), heap.end());
        }
      }
      return;
    }
    const double diff = q[n.dim] - n.split;
    const int first = diff < 0 ? n.left : n.right;
    const int second = diff < 0 ? n.right : n.left;
    knn_rec(first, q, k, heap);
    if (heap.size() < k || diff * diff <= heap.front().first) knn_rec(second, q, k, heap);
  }

  void radius_rec(int id, const Vec3& q, double r2, std::vector<int>& out) const {
    const Node& n = nodes_[id];
    if (n.dim < 0) {
      for (int i = n.begin; i < n.end; ++i) {
        if ((points_[index_[i]] - q).squaredNorm() <= r2) out.push_back(index_[i]);
      }
      return;
    }
    const double diff = q[n.dim] - n.split;
    if (diff < 0 || diff * diff <= r2) radius_rec(n.left, q, r2, out);
    if (diff >= 0 || diff * diff <= r2) radius_rec(n.right, q, r2, out);
  }

  void capsule_rec(int id, const Vec3& a, const Vec3& b, double r, std::vector<int>& out) const {
    const Node& n = nodes_[id];
    const Vec3 center = 0.5 * (n.lo + n.hi);
    const double reach = r + 0.5 * (n.hi - n.lo).norm();
    if (segment_distance2(center, a, b) > reach * reach) return;
    if (n.dim < 0) {
      for (int i = n.begin; i < n.end; ++i) {
        if (segment_distance2(points_[index_[i]], a, b) <= r * r) out.push_back(index_[i]);
      }
      return;
    }
    capsule_rec(n.left, a, b, r, out);
    capsule_rec(n.right, a, b, r, out);
  }

  std::vector<Vec3> points_;
  std::vector<int> index_;
  std::vector<Node> nodes_;
};

}  // namespace priorsplat
