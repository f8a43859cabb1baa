#include "geoup/kdtree.hpp"

#include "geoup/error.hpp"

#include <algorithm>
#include <numeric>
#include <queue>
#include <string>

namespace geoup {

namespace {

struct Candidate {
  double d2;
  int index;
  bool operator<(const Candidate& o) const { return d2 < o.d2 || (d2 == o.d2 && index < o.index); }
};

}  // namespace

double squared_distance_to_box(const Vec3& p, const Aabb& box) {
  double d[3];
  for (int a = 0; a < 3; ++a) {
    if (p[a] < box.lo[a]) {
      d[a] = box.lo[a] - p[a];
    } else if (p[a] > box.hi[a]) {
      d[a] = p[a] - box.hi[a];
    } else {
      d[a] = 0.0;
    }
  }
  // Same association order as squared_distance, which keeps the bound
  // monotone under rounding.
  return d[0] * d[0] + d[1] * d[1] + d[2] * d[2];
}

KdTree::KdTree(std::span<const Vec3> points, std::size_t leaf_size)
    : points_(points.begin(), points.end()), order_(points.size()) {
  std::iota(order_.begin(), order_.end(), 0);
  if (!points_.empty()) {
    nodes_.reserve(2 * points_.size() / std::max<std::size_t>(1, leaf_size) + 1);
    build(0, static_cast<int>(points_.size()), std::max<std::size_t>(1, leaf_size));
  }
}

int KdTree::build(int begin, int end, std::size_t leaf_size) {
  const int id = static_cast<int>(nodes_.size());
  nodes_.push_back({});
  Aabb box;
  for (int i = begin; i < end; ++i) box.expand(points_[order_[i]]);
  nodes_[id].box = box;
  nodes_[id].begin = begin;
  nodes_[id].end = end;
  if (static_cast<std::size_t>(end - begin) <= leaf_size) return id;

  int axis = 0;
  const Vec3 extent = box.extent();
  if (extent.y() > extent[axis]) axis = 1;
  if (extent.z() > extent[axis]) axis = 2;
  const int mid = begin + (end - begin) / 2;
  std::nth_element(order_.begin() + begin, order_.begin() + mid, order_.begin() + end,
                   [&](int a, int b) {
                     const double pa = points_[a][axis];
                     const double pb = points_[b][axis];
                     return pa < pb || (pa == pb && a < b);
                   });
  const int left = build(begin, mid, leaf_size);
  const int right = build(mid, end, leaf_size);
  nodes_[id].left = left;
  nodes_[id].right = right;
  return id;
}

std::vector<KdTree::Neighbor> KdTree::knn_with_distances(const Vec3& query, std::size_t k) const {
  if (k > points_.size()) {
    throw ArgumentError("knn: k=" + std::to_string(k) + " exceeds point count " +
                        std::to_string(points_.size()));
  }
  std::vector<Neighbor> result;
  if (k == 0) return result;

  std::priority_queue<Candidate> best;  // max-heap on (d2, index)
  std::vector<int> stack{0};
  while (!stack.empty()) {
    const int id = stack.back();
    stack.pop_back();
    const Node& node = nodes_[id];
    if (best.size() == k && squared_distance_to_box(query, node.box) > best.top().d2) continue;
    if (node.left < 0) {
      for (int i = node.begin; i < node.end; ++i) {
        const int idx = order_[i];
        const Candidate c{squared_distance(query, points_[idx]), idx};
        if (best.size() < k) {
          best.push(c);
        } else if (c < best.top()) {
          best.pop();
          best.push(c);
        }
      }
      continue;
    }
    const double dl = squared_distance_to_box(query, nodes_[node.left].box);
    const double dr = squared_distance_to_box(query, nodes_[node.right].box);
    // Visit the closer child first (pushed last).
    if (dl <= dr) {
      stack.push_back(node.right);
      stack.push_back(node.left);
    } else {
      stack.push_back(node.left);
      stack.push_back(node.right);
    }
  }
  result.resize(best.size());
  for (std::size_t i = best.size(); i-- > 0;) {
    result[i] = {best.top().index, best.top().d2};
    best.pop();
  }
  return result;
}

std::vector<int> KdTree::knn(const Vec3& query, std::size_t k) const {
  const auto found = knn_with_distances(query, k);
  std::vector<int> out;
  out.reserve(found.size());
  for (const auto& n : found) out.push_back(n.index);
  return out;
}

KdTree::Neighbor KdTree::nearest(const Vec3& query) const {
  if (points_.empty()) throw ArgumentError("nearest: empty point set");
  return knn_with_distances(query, 1).front();
}

}  // namespace geoup
