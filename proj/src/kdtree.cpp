#include "cradmap/kdtree.hpp"

#include <algorithm>
#include <queue>
#include <utility>

namespace cradmap {

namespace {

constexpr int kLeafSize = 12;

using Candidate = std::pair<double, int>;

}  // namespace

KdTree::KdTree(std::span<const Point3> points)
    : points_(points.begin(), points.end()), order_(points.size()) {
  for (std::size_t i = 0; i < order_.size(); ++i) order_[i] = static_cast<int>(i);
  if (!points_.empty()) {
    nodes_.reserve(2 * points_.size() / kLeafSize + 2);
    build(0, static_cast<int>(points_.size()));
  }
}

int KdTree::build(int begin, int end) {
  const int id = static_cast<int>(nodes_.size());
  nodes_.push_back(Node{begin, end});
  if (end - begin <= kLeafSize) return id;

  Eigen::Vector3d lo = points_[order_[begin]];
  Eigen::Vector3d hi = lo;
  for (int i = begin + 1; i < end; ++i) {
    lo = lo.cwiseMin(points_[order_[i]]);
    hi = hi.cwiseMax(points_[order_[i]]);
  }
  int axis = 0;
  (hi - lo).maxCoeff(&axis);
  if (hi[axis] - lo[axis] <= 0.0) return id;  // all points coincide

  const int mid = begin + (end - begin) / 2;
  std::nth_element(order_.begin() + begin, order_.begin() + mid,
                   order_.begin() + end, [&](int a, int b) {
                     return points_[a][axis] < points_[b][axis];
                   });
  const double split = points_[order_[mid]][axis];
  const int left = build(begin, mid);
  const int right = build(mid, end);
  Node& node = nodes_[id];
  node.axis = axis;
  node.split = split;
  node.left = left;
  node.right = right;
  return id;
}

std::vector<int> KdTree::nearest(const Point3& query, int k, int exclude) const {
  std::vector<int> out;
  if (k <= 0 || nodes_.empty()) return out;

  // Max-heap on (distance, index): the top is the current worst candidate.
  std::priority_queue<Candidate> heap;
  const auto full = [&] { return static_cast<int>(heap.size()) >= k; };

  const auto visit = [&](auto&& self, int node_id) -> void {
    const Node& node = nodes_[node_id];
    if (node.axis < 0) {
      for (int i = node.begin; i < node.end; ++i) {
        const int idx = order_[i];
        if (idx == exclude) continue;
        const Candidate c{(points_[idx] - query).squaredNorm(), idx};
        if (!full()) {
          heap.push(c);
        } else if (c < heap.top()) {
          heap.pop();
          heap.push(c);
        }
      }
      return;
    }
    const double diff = query[node.axis] - node.split;
    const int near = diff < 0.0 ? node.left : node.right;
    const int far = diff < 0.0 ? node.right : node.left;
    self(self, near);
    if (!full() || diff * diff <= heap.top().first) self(self, far);
  };
  visit(visit, 0);

  out.resize(heap.size());
  for (int i = static_cast<int>(heap.size()) - 1; i >= 0; --i) {
    out[i] = heap.top().second;
    heap.pop();
  }
  return out;
}

std::vector<int> KdTree::within_radius(const Point3& query, double radius) const {
  std::vector<int> out;
  if (nodes_.empty() || radius < 0.0) return out;
  const double r2 = radius * radius;
  const auto visit = [&](auto&& self, int node_id) -> void {
    const Node& node = nodes_[node_id];
    if (node.axis < 0) {
      for (int i = node.begin; i < node.end; ++i) {
        const int idx = order_[i];
        if ((points_[idx] - query).squaredNorm() <= r2) out.push_back(idx);
      }
      return;
    }
    const double diff = query[node.axis] - node.split;
    const int near = diff < 0.0 ? node.left : node.right;
    const int far = diff < 0.0 ? node.right : node.left;
    self(self, near);
    if (diff * diff <= r2) self(self, far);
  };
  visit(visit, 0);
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace cradmap
