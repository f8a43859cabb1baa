#pragma once

#include "geoup/geometry.hpp"

#include "json.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace geoup::metrics {

enum class ChamferNorm {
  /// Both directed sums divided by |Y|.
  target_count,
  /// Mean over X plus mean over Y.
  symmetric_mean,
};

/// Index of the nearest point of `to` for every point of `from`, lowest index
/// on ties.
std::vector<int> nearest_indices(std::span<const Vec3> from, std::span<const Vec3> to);

double chamfer(std::span<const Vec3> x, std::span<const Vec3> y,
               ChamferNorm norm = ChamferNorm::target_count);
double hausdorff(std::span<const Vec3> x, std::span<const Vec3> y);

/// Jensen-Shannon divergence of voxel occupancy on a grid^3 lattice over the
/// union bounding box inflated by 1% per side. Natural log.
double jsd(std::span<const Vec3> x, std::span<const Vec3> y, std::size_t grid = 32);

/// Closest point on triangle abc to p (vertex, edge and face regions).
Vec3 closest_point_on_triangle(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c);

/// Triangle BVH for point-to-surface distance. Answers equal the minimum over
/// all triangles of the same per-triangle distance.
class TriangleBvh {
 public:
  explicit TriangleBvh(const TriangleMesh& mesh);

  double squared_distance(const Vec3& p) const;
  double distance(const Vec3& p) const;

 private:
  struct Node {
    Aabb box;
    int begin = 0;
    int end = 0;
    int left = -1;
    int right = -1;
  };
  int build(int begin, int end, std::vector<Vec3>& centers);
  double triangle_d2(int t, const Vec3& p) const;

  std::vector<Vec3> vertices_;
  std::vector<Triangle> triangles_;
  std::vector<int> order_;
  std::vector<Node> nodes_;
};

struct P2fStats {
  double mean = 0.0;
  double std = 0.0;  // population
};

P2fStats p2f(std::span<const Vec3> points, const TriangleMesh& mesh);

/// min(|n - m|^2, |n + m|^2) for unit n, m (tolerance 1e-5 on the norms).
double normal_loss_unoriented(const Vec3& n, const Vec3& m);
/// Index-aligned sum (or mean) of the unoriented normal loss.
double coarse_normal_loss(std::span<const Vec3> predicted, std::span<const Vec3> truth, bool mean = false);
/// Each predicted sample is matched to its nearest ground-truth point.
double refined_normal_loss(std::span<const Vec3> points, std::span<const Vec3> normals,
                           const PointCloud& truth, bool mean = false);

struct LossWeights {
  double alpha = 100.0;
  double beta = 1.0;
  double gamma = 1.0;
  void validate() const;
};

double total_loss(double cd, double coarse, double refined, const LossWeights& w = {});

struct SurfaceComparison {
  double cd = 0.0;
  double hd = 0.0;
  double jsd = 0.0;
};

/// Samples n points from each mesh and compares the samples. By default the
/// two meshes get independent derived seeds; same_stream reuses `seed` for both.
SurfaceComparison surface_compare(const TriangleMesh& a, const TriangleMesh& b, std::size_t n = 200000,
                                  std::uint64_t seed = 42, bool same_stream = false);

struct MetricReport {
  double cd = 0.0;
  double hd = 0.0;
  double jsd = 0.0;
  double p2f_mean = 0.0;
  double p2f_std = 0.0;
  std::size_t predicted_points = 0;
  std::size_t reference_points = 0;
  std::optional<std::size_t> factor;
  std::optional<SurfaceComparison> reconstruction;
  nlohmann::ordered_json sources = nlohmann::ordered_json::object();

  nlohmann::ordered_json to_json() const;
};

/// CD/HD/JSD of pred against reference, P2F of pred against mesh when given.
MetricReport evaluate_cloud(std::span<const Vec3> pred, std::span<const Vec3> reference,
                            const TriangleMesh* mesh);

}  // namespace geoup::metrics
