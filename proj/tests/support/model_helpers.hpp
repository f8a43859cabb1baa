#pragma once

#include "geoup/model.hpp"
#include "geoup/rng.hpp"

#include <cmath>
#include <vector>

namespace geoup::testing {

// Small config used by the gradient checks: N=8, R=2, k=3, L=2, F=(8,8).
inline model::ModelConfig tiny_config() {
  model::ModelConfig c;
  c.factor = 2;
  c.patch_size = 8;
  c.neighbors = 3;
  c.features = {8, 8};
  c.recalibration_hidden = 8;
  c.expansion_hidden = 8;
  c.transform_hidden = 8;
  c.refine_hidden = 8;
  return c;
}

// Overwrites every weight (including zero-initialized heads) with uniform
// values in +-sqrt(6/(in+out)) * gain and every bias with +-0.2 * gain.
inline void randomize(model::ModelParams<float>& params, std::uint64_t seed, double gain = 1.0) {
  Pcg32 rng(seed);
  for (auto& [name, t] : model::named_parameters(params)) {
    double limit = 0.2 * gain;
    if (t->rank() == 2) limit = gain * std::sqrt(6.0 / static_cast<double>(t->dim(0) + t->dim(1)));
    for (auto& v : t->mutable_values()) v = static_cast<float>(rng.uniform(-limit, limit));
  }
}

// Points on a spherical cap of radius 1 around +z, scaled to unit patch radius.
inline std::vector<Vec3> random_cap(std::size_t n, std::uint64_t seed, double spread = 0.6) {
  Pcg32 rng(seed);
  std::vector<Vec3> out;
  for (std::size_t i = 0; i < n; ++i) {
    const double u = rng.uniform(-spread, spread);
    const double v = rng.uniform(-spread, spread);
    const Vec3 p = Vec3(u, v, 1.0).normalized();
    out.push_back((p - Vec3(0, 0, 1)) / spread);
  }
  return out;
}

}  // namespace geoup::testing
