#pragma once

#include "geoup/geometry.hpp"
#include "geoup/rng.hpp"

#include <cstdint>
#include <span>
#include <vector>

namespace geoup::sampling {

/// Greedy farthest point sampling. The first index is seed_index; every later
/// pick maximizes the distance to the already selected set, lowest index on
/// ties. Throws ArgumentError if count exceeds the point count.
std::vector<int> farthest_point_sample(std::span<const Vec3> points, std::size_t count,
                                       std::size_t seed_index = 0);

/// k nearest indices of query, ascending distance, ties by index.
std::vector<int> knn(std::span<const Vec3> points, const Vec3& query, std::size_t k);

/// Exactly n samples on the mesh surface with interpolated unit normals.
/// Dart throwing (area weighted, 4n candidates) followed by sample
/// elimination: repeatedly drop the surviving point whose nearest surviving
/// neighbor is closest. Throws GeometryError for zero-area meshes.
PointCloud poisson_disk_sample(const TriangleMesh& mesh, std::size_t n, std::uint64_t seed);

/// A neighborhood of a parent cloud, centered on its centroid and scaled so
/// the farthest point sits at radius 1.
struct Patch {
  std::vector<int> indices;
  std::vector<Vec3> points;
  std::vector<Vec3> normals;  // empty when the parent has none
  Vec3 centroid = Vec3::Zero();
  double scale = 1.0;
  int seed_index = -1;
};

/// Builds a normalized patch from parent[indices].
Patch make_patch(const PointCloud& parent, std::vector<int> indices);

/// Maps world points into the patch frame: (p - centroid) / scale.
std::vector<Vec3> normalize(const Patch& patch, std::span<const Vec3> points);
/// Inverse of normalize: p * scale + centroid.
std::vector<Vec3> denormalize(const Patch& patch, std::span<const Vec3> points);

struct PatchSet {
  std::vector<Patch> patches;
  /// Parent points that ended up in no patch.
  std::size_t uncovered = 0;
};

/// ceil(coverage * M / N) seeds (capped at M); each patch is kNN(seed, N).
/// Seeds come from farthest point sampling from index 0, or uniformly at
/// random when random_seeds is given.
PatchSet extract_patches(const PointCloud& cloud, std::size_t patch_size, double coverage = 3.0,
                         Pcg32* random_seeds = nullptr);

std::size_t patch_seed_count(std::size_t points, std::size_t patch_size, double coverage);

struct AugmentOptions {
  bool rotate = true;
  double scale_lo = 0.8;
  double scale_hi = 1.2;
  /// Jitter standard deviation as a fraction of the patch radius.
  double jitter_sigma = 0.005;
  double jitter_clip = 3.0;
};

struct AugmentParams {
  Mat3 rotation = Mat3::Identity();
  double scale = 1.0;
  double jitter_sigma = 0.0;  // absolute, in patch units
  double jitter_clip = 3.0;   // in units of jitter_sigma
};

/// Uniformly distributed rotation from a random unit quaternion.
Mat3 random_rotation(Pcg32& rng);

AugmentParams draw_augment(const AugmentOptions& options, double radius, Pcg32& rng);

/// p -> scale * R p, n -> R n. Identity parameters leave the input untouched.
void apply_similarity(const AugmentParams& params, std::vector<Vec3>& points,
                      std::vector<Vec3>& normals);

/// Clipped Gaussian perturbation of every coordinate. No-op when sigma is 0.
void apply_jitter(const AugmentParams& params, std::vector<Vec3>& points, Pcg32& rng);

/// Random rotation, scale and jitter of a patch; normals only rotate.
Patch augment(const Patch& patch, Pcg32& rng, const AugmentOptions& options = {});

/// Concatenates every part and reduces to exactly target points with farthest
/// point sampling seeded at index 0. Parts must all carry normals or none.
PointCloud fuse_patches(std::span<const PointCloud> parts, std::size_t target);

}  // namespace geoup::sampling
