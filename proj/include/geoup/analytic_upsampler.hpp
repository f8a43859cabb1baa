#pragma once

#include "geoup/geometry.hpp"
#include "geoup/local_geometry.hpp"
#include "geoup/rng.hpp"

#include <string_view>
#include <vector>

namespace geoup::analytic {

enum class PatternKind { fibonacci_disk, jittered_grid };

PatternKind parse_pattern(std::string_view name);

struct SamplePattern {
  PatternKind kind = PatternKind::fibonacci_disk;
  /// Disk radius as a multiple of the local spacing.
  double radius_scale = 0.7;
};

/// R samples in the disk of radius pattern.radius_scale * local_radius.
/// fibonacci_disk: r_j = radius sqrt((j + 0.5) / R) at angle j * golden angle.
/// jittered_grid: first R cells (row major) of a ceil(sqrt R)^2 grid inscribed
/// in the disk, one uniform sample per cell; consumes rng.
std::vector<local::ParamSample> param_samples(std::size_t factor, const SamplePattern& pattern,
                                              double local_radius, Pcg32& rng);

struct AnalyticOptions {
  std::size_t factor = 4;
  std::size_t neighbors = local::kDefaultNeighbors;
  SamplePattern pattern{};
  /// When false the tangent-plane samples are emitted without displacement.
  bool displace = true;
  std::uint64_t seed = 42;
};

struct AnalyticResult {
  UpsampleResult result;
  std::vector<local::AugmentedJacobian> frames;  // one per source point
  std::vector<local::FundamentalForms> forms;    // one per source point
  std::vector<double> local_radius;              // one per source point
};

/// Per point: kNN neighborhood, frame, curvature fit, local spacing (median
/// distance to the 4 nearest other points), samples rotated into principal
/// coordinates, tangent lift, displacement along t3 clamped to the local
/// spacing, and quadric normals. Degenerate frames emit R copies of the source
/// point with delta 0 and normal +z. Requires more than `neighbors` points.
AnalyticResult upsample_analytic(std::span<const Vec3> points, const AnalyticOptions& options);

}  // namespace geoup::analytic
