#include "doctest.h"

#include "geoup/analytic_upsampler.hpp"
#include "geoup/error.hpp"

#include "../support/shapes.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

using namespace geoup;

TEST_CASE("fibonacci pattern") {
  analytic::SamplePattern pat;
  Pcg32 rng(1);
  const auto one = analytic::param_samples(1, pat, 1.0, rng);
  REQUIRE(one.size() == 1);
  CHECK(std::hypot(one[0].u, one[0].v) == doctest::Approx(0.7 * std::sqrt(0.5)));

  const auto s = analytic::param_samples(16, pat, 1.0, rng);
  REQUIRE(s.size() == 16);
  double dmin = INFINITY;
  for (std::size_t i = 0; i < s.size(); ++i) {
    CHECK(s[i].u * s[i].u + s[i].v * s[i].v <= 0.49 + 1e-12);
    for (std::size_t j = i + 1; j < s.size(); ++j) dmin = std::min(dmin, std::hypot(s[i].u - s[j].u, s[i].v - s[j].v));
  }
  CHECK(dmin >= 0.3 * 0.7 / 4.0);
}

TEST_CASE("jittered grid pattern") {
  analytic::SamplePattern pat{analytic::PatternKind::jittered_grid, 0.7};
  Pcg32 a(4), b(4);
  const auto s = analytic::param_samples(5, pat, 2.0, a);
  REQUIRE(s.size() == 5);
  for (const auto& p : s) CHECK(p.u * p.u + p.v * p.v <= 1.4 * 1.4 + 1e-12);
  const auto t = analytic::param_samples(5, pat, 2.0, b);
  for (std::size_t i = 0; i < 5; ++i) CHECK(s[i].u == t[i].u);
  CHECK(analytic::parse_pattern("grid") == analytic::PatternKind::jittered_grid);
  CHECK(analytic::parse_pattern("fibonacci") == analytic::PatternKind::fibonacci_disk);
  CHECK_THROWS_AS(analytic::parse_pattern("hex"), ArgumentError);
}

TEST_CASE("plane input stays planar") {
  const auto plane = testing::plane_grid(12, 0.1);
  analytic::AnalyticOptions o;
  const auto res = analytic::upsample_analytic(plane, o);
  for (const auto& p : res.result.points) CHECK(std::abs(p.z()) < 1e-6);
  for (const auto& n : res.result.normals) CHECK(std::abs(std::abs(n.z()) - 1.0) < 1e-9);
}

TEST_CASE("sphere output contract and identities") {
  const auto sphere = testing::fibonacci_sphere(1000, 2.0);
  analytic::AnalyticOptions o;
  const auto res = analytic::upsample_analytic(sphere, o);
  const auto& r = res.result;
  CHECK(r.points.size() == 4000);
  CHECK(r.normals.size() == 4000);
  CHECK(r.deltas.size() == 4000);
  CHECK(r.coarse_normals.size() == 1000);
  CHECK(r.factor == 4);
  for (std::size_t i = 0; i < 1000; ++i) {
    const auto& f = res.frames[i];
    CHECK(r.coarse_normals[i] == f.t3);
    for (std::size_t j = 0; j < 4; ++j) {
      const std::size_t k = i * 4 + j;
      CHECK(r.parent[k] == static_cast<int>(i));
      CHECK(std::abs(r.normals[k].norm() - 1.0) < 1e-6);
      // x - delta t3 lies on the tangent plane at the source.
      const Vec3 xhat = r.points[k] - r.deltas[k] * f.t3;
      CHECK(std::abs((xhat - f.origin).dot(f.t3)) < 1e-7);
      CHECK(std::abs(r.deltas[k]) <= res.local_radius[i] + 1e-15);
      CHECK((r.points[k] - sphere[i]).norm() <= 0.7 * res.local_radius[i] + std::abs(r.deltas[k]) + 1e-12);
    }
  }
}

TEST_CASE("zero radius reproduces the input") {
  const auto sphere = testing::fibonacci_sphere(200, 1.0);
  analytic::AnalyticOptions o;
  o.factor = 1;
  o.pattern.radius_scale = 0.0;
  const auto res = analytic::upsample_analytic(sphere, o);
  for (std::size_t i = 0; i < sphere.size(); ++i) CHECK((res.result.points[i] - sphere[i]).norm() < 1e-7);
}

TEST_CASE("too few points") {
  const auto few = testing::fibonacci_sphere(10, 1.0);
  CHECK_THROWS_AS(analytic::upsample_analytic(few, analytic::AnalyticOptions{}), ArgumentError);
}
