#include "geoup/analytic_upsampler.hpp"

#include "geoup/error.hpp"
#include "geoup/kdtree.hpp"
#include "geoup/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

namespace geoup::analytic {

PatternKind parse_pattern(std::string_view name) {
  if (name == "fibonacci" || name == "fibonacci_disk") return PatternKind::fibonacci_disk;
  if (name == "grid" || name == "jittered_grid") return PatternKind::jittered_grid;
  throw ArgumentError("unknown sample pattern '" + std::string(name) + "'");
}

std::vector<local::ParamSample> param_samples(std::size_t factor, const SamplePattern& pattern,
                                              double local_radius, Pcg32& rng) {
  if (factor == 0) throw ArgumentError("param_samples: factor must be >= 1");
  const double radius = pattern.radius_scale * local_radius;
  std::vector<local::ParamSample> samples;
  samples.reserve(factor);
  if (pattern.kind == PatternKind::fibonacci_disk) {
    const double golden = std::numbers::pi * (3.0 - std::sqrt(5.0));
    for (std::size_t j = 0; j < factor; ++j) {
      const double r = radius * std::sqrt((static_cast<double>(j) + 0.5) / static_cast<double>(factor));
      const double angle = static_cast<double>(j) * golden;
      samples.push_back({r * std::cos(angle), r * std::sin(angle)});
    }
    return samples;
  }
  const auto side = static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(factor))));
  // The grid covers the square inscribed in the disk.
  const double half = radius / std::sqrt(2.0);
  const double cell = 2.0 * half / static_cast<double>(side);
  for (std::size_t j = 0; j < factor; ++j) {
    const double row = static_cast<double>(j / side);
    const double col = static_cast<double>(j % side);
    const double u = -half + (col + rng.uniform()) * cell;
    const double v = -half + (row + rng.uniform()) * cell;
    samples.push_back({u, v});
  }
  return samples;
}

AnalyticResult upsample_analytic(std::span<const Vec3> points, const AnalyticOptions& options) {
  const std::size_t n = points.size();
  const std::size_t factor = options.factor;
  if (factor == 0) throw ArgumentError("upsample_analytic: factor must be >= 1");
  if (options.neighbors < 6) throw ArgumentError("upsample_analytic: need k >= 6");
  if (n < options.neighbors + 1) {
    throw ArgumentError("upsample_analytic: need more than k=" + std::to_string(options.neighbors) +
                        " points, got " + std::to_string(n));
  }

  const KdTree tree(points);
  AnalyticResult out;
  UpsampleResult& res = out.result;
  res.factor = factor;
  res.points.resize(n * factor);
  res.normals.resize(n * factor);
  res.deltas.resize(n * factor);
  res.parent.resize(n * factor);
  res.coarse_normals.resize(n);
  out.frames.resize(n);
  out.forms.resize(n);
  out.local_radius.resize(n);
  std::vector<char> bad_frame(n, 0);

  parallel_for(n, [&](std::size_t i) {
    const auto neighbors = tree.knn_with_distances(points[i], options.neighbors + 1);
    std::vector<Vec3> hood;
    hood.reserve(neighbors.size());
    for (const auto& nb : neighbors) hood.push_back(points[nb.index]);

    // Median over the 4 nearest other points; neighbors[0] is the point itself
    // unless duplicates tie with it, which only shifts the window by one.
    const double spacing = 0.5 * (std::sqrt(neighbors[2].squared_distance) +
                                  std::sqrt(neighbors[3].squared_distance));
    out.local_radius[i] = spacing;

    for (std::size_t r = 0; r < factor; ++r) res.parent[i * factor + r] = static_cast<int>(i);

    local::AugmentedJacobian frame;
    try {
      frame = local::estimate_frame(hood, points[i]);
    } catch (const GeometryError&) {
      bad_frame[i] = 1;
      frame.origin = points[i];
      out.frames[i] = frame;
      res.coarse_normals[i] = frame.t3;
      for (std::size_t r = 0; r < factor; ++r) {
        res.points[i * factor + r] = points[i];
        res.normals[i * factor + r] = frame.t3;
        res.deltas[i * factor + r] = 0.0;
      }
      return;
    }
    const local::FundamentalForms forms = local::fit_fundamental_forms(hood, frame);
    out.frames[i] = frame;
    out.forms[i] = forms;
    res.coarse_normals[i] = local::normal_from_T(frame);

    Pcg32 rng(mix_seed(options.seed, i));
    const auto samples = param_samples(factor, options.pattern, spacing, rng);
    for (std::size_t r = 0; r < factor; ++r) {
      const local::ParamSample& principal = samples[r];
      const local::ParamSample uv = local::principal_to_frame(forms, principal);
      const Vec3 on_plane = local::lift_to_tangent(frame, uv);
      double delta = options.displace ? local::normal_displacement(forms, principal) : 0.0;
      delta = std::clamp(delta, -spacing, spacing);
      const std::size_t slot = i * factor + r;
      res.points[slot] = on_plane + delta * frame.t3;
      res.deltas[slot] = delta;
      res.normals[slot] = options.displace ? local::quadric_normal(forms, principal, frame) : frame.t3;
    }
  });

  res.degenerate_frames = static_cast<std::size_t>(std::count(bad_frame.begin(), bad_frame.end(), 1));
  for (std::size_t i = 0; i < n; ++i) {
    if (!bad_frame[i] && out.forms[i].degenerate) ++res.degenerate_fits;
  }
  return out;
}

}  // namespace geoup::analytic
