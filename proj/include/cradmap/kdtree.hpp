#ifndef CRADMAP_KDTREE_HPP
#define CRADMAP_KDTREE_HPP

#include <span>
#include <vector>

#include "cradmap/geometry.hpp"

namespace cradmap {

// Static 3-d tree over a point set. Neighbor results are ordered by
// (squared distance, index), so ties resolve the same way a stable
// brute-force scan would.
class KdTree {
 public:
  explicit KdTree(std::span<const Point3> points);

  std::size_t size() const { return points_.size(); }

  // Indices of the k nearest points to `query`, skipping index `exclude`.
  std::vector<int> nearest(const Point3& query, int k, int exclude = -1) const;

  // Indices of all points within `radius` (inclusive), ascending.
  std::vector<int> within_radius(const Point3& query, double radius) const;

 private:
  struct Node {
    int begin = 0;
    int end = 0;
    int axis = -1;  // -1 marks a leaf
    double split = 0.0;
    int left = -1;
    int right = -1;
  };

  int build(int begin, int end);

  std::vector<Point3> points_;
  std::vector<int> order_;
  std::vector<Node> nodes_;
};

}  // namespace cradmap

#endif  // CRADMAP_KDTREE_HPP
