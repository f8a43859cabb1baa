#include "geoup/sampling.hpp"

#include "geoup/error.hpp"
#include "geoup/kdtree.hpp"
#include "geoup/parallel.hpp"

#include <Eigen/Geometry>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <queue>
#include <string>
#include <unordered_map>

namespace geoup::sampling {

std::vector<int> farthest_point_sample(std::span<const Vec3> points, std::size_t count,
                                       std::size_t seed_index) {
  const std::size_t n = points.size();
  if (count > n) {
    throw ArgumentError("farthest_point_sample: count " + std::to_string(count) +
                        " exceeds point count " + std::to_string(n));
  }
  if (count == 0) return {};
  if (seed_index >= n) throw ArgumentError("farthest_point_sample: seed index out of range");

  std::vector<double> min_d2(n, std::numeric_limits<double>::infinity());
  std::vector<char> taken(n, 0);
  std::vector<int> selected;
  selected.reserve(count);
  std::size_t current = seed_index;
  for (;;) {
    selected.push_back(static_cast<int>(current));
    taken[current] = 1;
    if (selected.size() == count) break;
    const Vec3& c = points[current];
    double best = -1.0;
    std::size_t best_index = 0;
    for (std::size_t i = 0; i < n; ++i) {
      if (taken[i]) continue;
      const double d2 = squared_distance(points[i], c);
      if (d2 < min_d2[i]) min_d2[i] = d2;
      if (min_d2[i] > best) {
        best = min_d2[i];
        best_index = i;
      }
    }
    current = best_index;
  }
  return selected;
}

std::vector<int> knn(std::span<const Vec3> points, const Vec3& query, std::size_t k) {
  return KdTree(points).knn(query, k);
}

namespace {

// Sparse uniform grid holding the surviving candidates during elimination.
class EliminationGrid {
 public:
  EliminationGrid(std::span<const Vec3> points, double cell) : points_(points), cell_(cell) {
    const Aabb box = bounding_box(points);
    origin_ = box.lo;
    const Vec3 cells = box.extent() / cell_;
    max_ring_ = static_cast<int>(std::ceil(cells.maxCoeff())) + 2;
    for (std::size_t i = 0; i < points.size(); ++i) {
      cells_[key(coord(points[i]))].push_back(static_cast<int>(i));
    }
  }

  void remove(int index) {
    auto& bucket = cells_[key(coord(points_[index]))];
    const auto it = std::find(bucket.begin(), bucket.end(), index);
    *it = bucket.back();
    bucket.pop_back();
  }

  // Nearest surviving neighbor of index (excluding itself); ties by index.
  std::pair<double, int> nearest(int index) const {
    const Vec3& p = points_[index];
    const Eigen::Vector3i c = coord(p);
    double best = std::numeric_limits<double>::infinity();
    int best_index = -1;
    for (int ring = 0; ring <= max_ring_; ++ring) {
      for (int dx = -ring; dx <= ring; ++dx) {
        for (int dy = -ring; dy <= ring; ++dy) {
          for (int dz = -ring; dz <= ring; ++dz) {
            if (std::max({std::abs(dx), std::abs(dy), std::abs(dz)}) != ring) continue;
            const auto it = cells_.find(key(c + Eigen::Vector3i(dx, dy, dz)));
            if (it == cells_.end()) continue;
            for (int j : it->second) {
              if (j == index) continue;
              const double d2 = squared_distance(p, points_[j]);
              if (d2 < best || (d2 == best && j < best_index)) {
                best = d2;
                best_index = j;
              }
            }
          }
        }
      }
      const double reach = ring * cell_;
      if (best_index >= 0 && best <= reach * reach) break;
    }
    return {best, best_index};
  }

 private:
  Eigen::Vector3i coord(const Vec3& p) const {
    const Vec3 q = (p - origin_) / cell_;
    return {static_cast<int>(std::floor(q.x())), static_cast<int>(std::floor(q.y())),
            static_cast<int>(std::floor(q.z()))};
  }
  static std::uint64_t key(const Eigen::Vector3i& c) {
    constexpr std::int64_t offset = 1 << 20;
    const auto part = [](int v) { return static_cast<std::uint64_t>(v + offset) & 0x1FFFFFu; };
    return part(c.x()) | (part(c.y()) << 21) | (part(c.z()) << 42);
  }

  std::span<const Vec3> points_;
  double cell_;
  Vec3 origin_;
  int max_ring_ = 0;
  std::unordered_map<std::uint64_t, std::vector<int>> cells_;
};

}  // namespace

PointCloud poisson_disk_sample(const TriangleMesh& mesh, std::size_t n, std::uint64_t seed) {
  if (n == 0) throw ArgumentError("poisson_disk_sample: n must be positive");
  validate_mesh(mesh);
  std::vector<double> cdf;
  cdf.reserve(mesh.triangles.size());
  double total = 0.0;
  for (const auto& t : mesh.triangles) {
    total += triangle_area(mesh.vertices[t[0]], mesh.vertices[t[1]], mesh.vertices[t[2]]);
    cdf.push_back(total);
  }
  if (!(total > 0.0)) throw GeometryError("poisson_disk_sample: mesh has zero surface area");
  const std::vector<Vec3> vertex_normals =
      mesh.has_normals() ? mesh.normals : compute_vertex_normals(mesh);

  const std::size_t candidates = 4 * n;
  std::vector<Vec3> points(candidates);
  std::vector<Vec3> normals(candidates);
  Pcg32 rng(seed, 0x5eed);
  for (std::size_t c = 0; c < candidates; ++c) {
    const double target = rng.uniform() * total;
    // upper_bound lands on a positive-area triangle unless rounding pushed
    // target to the total; then fall back to the last positive-area one.
    std::size_t tri = std::upper_bound(cdf.begin(), cdf.end(), target) - cdf.begin();
    if (tri == cdf.size()) {
      tri = std::lower_bound(cdf.begin(), cdf.end(), total) - cdf.begin();
    }
    const auto& t = mesh.triangles[tri];
    const double s = std::sqrt(rng.uniform());
    const double r2 = rng.uniform();
    const double wa = 1.0 - s;
    const double wb = s * (1.0 - r2);
    const double wc = s * r2;
    points[c] = wa * mesh.vertices[t[0]] + wb * mesh.vertices[t[1]] + wc * mesh.vertices[t[2]];
    Vec3 nrm = wa * vertex_normals[t[0]] + wb * vertex_normals[t[1]] + wc * vertex_normals[t[2]];
    if (!(nrm.norm() > 1e-12)) {
      nrm = (mesh.vertices[t[1]] - mesh.vertices[t[0]]).cross(mesh.vertices[t[2]] - mesh.vertices[t[0]]);
    }
    normals[c] = nrm.normalized();
  }

  EliminationGrid grid(points, 2.0 * std::sqrt(total / static_cast<double>(n)));
  struct Entry {
    double d2;
    int index;
    int neighbor;
    bool operator>(const Entry& o) const { return d2 > o.d2 || (d2 == o.d2 && index > o.index); }
  };
  std::priority_queue<Entry, std::vector<Entry>, std::greater<Entry>> heap;
  for (std::size_t i = 0; i < candidates; ++i) {
    const auto [d2, j] = grid.nearest(static_cast<int>(i));
    heap.push({d2, static_cast<int>(i), j});
  }
  std::vector<char> alive(candidates, 1);
  std::size_t remaining = candidates;
  while (remaining > n) {
    const Entry top = heap.top();
    heap.pop();
    if (!alive[top.index]) continue;
    if (!alive[top.neighbor]) {
      // Removals only grow nearest-neighbor distances, so a stale entry is
      // refreshed lazily and re-queued.
      const auto [d2, j] = grid.nearest(top.index);
      heap.push({d2, top.index, j});
      continue;
    }
    alive[top.index] = 0;
    grid.remove(top.index);
    --remaining;
  }

  PointCloud cloud;
  cloud.points.reserve(n);
  cloud.normals.reserve(n);
  for (std::size_t i = 0; i < candidates; ++i) {
    if (!alive[i]) continue;
    cloud.points.push_back(points[i]);
    cloud.normals.push_back(normals[i]);
  }
  return cloud;
}

Patch make_patch(const PointCloud& parent, std::vector<int> indices) {
  Patch patch;
  patch.indices = std::move(indices);
  if (patch.indices.empty()) throw ArgumentError("make_patch: empty index list");
  Vec3 centroid = Vec3::Zero();
  for (int i : patch.indices) centroid += parent.points[i];
  centroid /= static_cast<double>(patch.indices.size());
  double radius = 0.0;
  for (int i : patch.indices) radius = std::max(radius, (parent.points[i] - centroid).norm());
  patch.centroid = centroid;
  patch.scale = radius > 0.0 ? radius : 1.0;
  patch.points.reserve(patch.indices.size());
  for (int i : patch.indices) patch.points.push_back((parent.points[i] - centroid) / patch.scale);
  if (parent.has_normals()) {
    for (int i : patch.indices) patch.normals.push_back(parent.normals[i]);
  }
  return patch;
}

std::vector<Vec3> normalize(const Patch& patch, std::span<const Vec3> points) {
  std::vector<Vec3> out;
  out.reserve(points.size());
  for (const auto& p : points) out.push_back((p - patch.centroid) / patch.scale);
  return out;
}

std::vector<Vec3> denormalize(const Patch& patch, std::span<const Vec3> points) {
  std::vector<Vec3> out;
  out.reserve(points.size());
  for (const auto& p : points) out.push_back(p * patch.scale + patch.centroid);
  return out;
}

std::size_t patch_seed_count(std::size_t points, std::size_t patch_size, double coverage) {
  const double raw = std::ceil(coverage * static_cast<double>(points) / static_cast<double>(patch_size));
  return std::min<std::size_t>(points, static_cast<std::size_t>(std::max(1.0, raw)));
}

PatchSet extract_patches(const PointCloud& cloud, std::size_t patch_size, double coverage,
                         Pcg32* random_seeds) {
  const std::size_t m = cloud.size();
  if (patch_size == 0) throw ArgumentError("extract_patches: patch size must be positive");
  if (patch_size > m) {
    throw ArgumentError("extract_patches: patch size " + std::to_string(patch_size) +
                        " exceeds point count " + std::to_string(m));
  }
  if (!(coverage > 0.0)) throw ArgumentError("extract_patches: coverage must be positive");

  const std::size_t seed_count = patch_seed_count(m, patch_size, coverage);
  std::vector<int> seeds;
  if (random_seeds != nullptr) {
    seeds.reserve(seed_count);
    for (std::size_t s = 0; s < seed_count; ++s) {
      seeds.push_back(static_cast<int>(random_seeds->below(static_cast<std::uint32_t>(m))));
    }
  } else {
    seeds = farthest_point_sample(cloud.points, seed_count, 0);
  }

  const KdTree tree(cloud.points);
  PatchSet result;
  result.patches.resize(seeds.size());
  parallel_for(seeds.size(), [&](std::size_t s) {
    Patch patch = make_patch(cloud, tree.knn(cloud.points[seeds[s]], patch_size));
    patch.seed_index = seeds[s];
    result.patches[s] = std::move(patch);
  });

  std::vector<char> covered(m, 0);
  for (const auto& patch : result.patches) {
    for (int i : patch.indices) covered[i] = 1;
  }
  result.uncovered = static_cast<std::size_t>(std::count(covered.begin(), covered.end(), 0));
  return result;
}

Mat3 random_rotation(Pcg32& rng) {
  const double u1 = rng.uniform();
  const double u2 = rng.uniform();
  const double u3 = rng.uniform();
  const double a = std::sqrt(1.0 - u1);
  const double b = std::sqrt(u1);
  const double tau = 2.0 * std::numbers::pi;
  const Eigen::Quaterniond q(b * std::cos(tau * u3), a * std::sin(tau * u2), a * std::cos(tau * u2),
                             b * std::sin(tau * u3));
  return q.normalized().toRotationMatrix();
}

AugmentParams draw_augment(const AugmentOptions& options, double radius, Pcg32& rng) {
  AugmentParams params;
  if (options.rotate) params.rotation = random_rotation(rng);
  params.scale = options.scale_lo == options.scale_hi
                     ? options.scale_lo
                     : rng.uniform(options.scale_lo, options.scale_hi);
  params.jitter_sigma = options.jitter_sigma * radius;
  params.jitter_clip = options.jitter_clip;
  return params;
}

void apply_similarity(const AugmentParams& params, std::vector<Vec3>& points,
                      std::vector<Vec3>& normals) {
  const bool rotate = params.rotation != Mat3::Identity();
  if (rotate) {
    for (auto& p : points) p = params.rotation * p;
    for (auto& n : normals) n = params.rotation * n;
  }
  if (params.scale != 1.0) {
    for (auto& p : points) p *= params.scale;
  }
}

void apply_jitter(const AugmentParams& params, std::vector<Vec3>& points, Pcg32& rng) {
  if (!(params.jitter_sigma > 0.0)) return;
  const double limit = params.jitter_clip * params.jitter_sigma;
  for (auto& p : points) {
    for (int a = 0; a < 3; ++a) p[a] += std::clamp(params.jitter_sigma * rng.normal(), -limit, limit);
  }
}

Patch augment(const Patch& patch, Pcg32& rng, const AugmentOptions& options) {
  double radius = 0.0;
  for (const auto& p : patch.points) radius = std::max(radius, p.norm());
  const AugmentParams params = draw_augment(options, radius, rng);
  Patch out = patch;
  apply_similarity(params, out.points, out.normals);
  apply_jitter(params, out.points, rng);
  return out;
}

PointCloud fuse_patches(std::span<const PointCloud> parts, std::size_t target) {
  PointCloud all;
  bool with_normals = !parts.empty() && parts.front().has_normals();
  for (const auto& part : parts) {
    if (part.has_normals() != with_normals && part.size() > 0) {
      throw ArgumentError("fuse_patches: parts disagree on normals");
    }
    all.points.insert(all.points.end(), part.points.begin(), part.points.end());
    all.normals.insert(all.normals.end(), part.normals.begin(), part.normals.end());
  }
  if (all.size() < target) {
    throw ArgumentError("fuse_patches: " + std::to_string(all.size()) +
                        " points cannot be reduced to " + std::to_string(target));
  }
  const auto keep = farthest_point_sample(all.points, target, 0);
  PointCloud fused;
  fused.points.reserve(target);
  for (int i : keep) fused.points.push_back(all.points[i]);
  if (with_normals) {
    fused.normals.reserve(target);
    for (int i : keep) fused.normals.push_back(all.normals[i]);
  }
  return fused;
}

}  // namespace geoup::sampling
