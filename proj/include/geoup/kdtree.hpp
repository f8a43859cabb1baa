#pragma once

#include "geoup/geometry.hpp"

#include <span>
#include <vector>

namespace geoup {

/// Median-split kd-tree over a fixed point set. Query results are exactly the
/// brute-force answer: candidates are ranked by (squared_distance, index) and
/// subtrees are pruned only when their box bound is strictly worse.
class KdTree {
 public:
  KdTree() = default;
  explicit KdTree(std::span<const Vec3> points, std::size_t leaf_size = 8);

  std::size_t size() const { return points_.size(); }
  std::span<const Vec3> points() const { return points_; }

  /// k nearest indices sorted by ascending distance, ties by ascending index.
  /// Throws ArgumentError if k > size().
  std::vector<int> knn(const Vec3& query, std::size_t k) const;

  struct Neighbor {
    int index;
    double squared_distance;
  };
  std::vector<Neighbor> knn_with_distances(const Vec3& query, std::size_t k) const;

  /// Index of the nearest point (lowest index on ties). Requires size() > 0.
  Neighbor nearest(const Vec3& query) const;

 private:
  struct Node {
    Aabb box;
    int begin = 0;
    int end = 0;
    int left = -1;
    int right = -1;
  };

  int build(int begin, int end, std::size_t leaf_size);

  std::vector<Vec3> points_;
  std::vector<int> order_;
  std::vector<Node> nodes_;
};

/// Squared distance from a point to an axis-aligned box (0 inside).
double squared_distance_to_box(const Vec3& p, const Aabb& box);

}  // namespace geoup
