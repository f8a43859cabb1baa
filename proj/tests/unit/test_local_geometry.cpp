#include "doctest.h"

#include "geoup/error.hpp"
#include "geoup/local_geometry.hpp"
#include "geoup/rng.hpp"
#include "geoup/sampling.hpp"

#include <Eigen/Geometry>

#include <cmath>
#include <numbers>
#include <vector>

using namespace geoup;

namespace {

// Points on the unit sphere around (0,0,1) with geodesic radius up to r.
std::vector<Vec3> sphere_cap(double r, int rings, int per_ring, double radius = 1.0) {
  std::vector<Vec3> out{Vec3(0, 0, radius)};
  for (int i = 1; i <= rings; ++i) {
    const double theta = r * i / rings;
    for (int j = 0; j < per_ring; ++j) {
      const double phi = 2 * std::numbers::pi * (j + 0.37 * i) / per_ring;
      out.push_back(radius * Vec3(std::sin(theta) * std::cos(phi), std::sin(theta) * std::sin(phi), std::cos(theta)));
    }
  }
  return out;
}

double angle_deg(const Vec3& a, const Vec3& b) {
  return std::atan2(a.cross(b).norm(), a.dot(b)) * 180.0 / std::numbers::pi;
}

local::AugmentedJacobian identity_frame() {
  local::AugmentedJacobian f;
  f.origin = Vec3::Zero();
  f.t1 = Vec3::UnitX();
  f.t2 = Vec3::UnitY();
  f.t3 = Vec3::UnitZ();
  return f;
}

}  // namespace

TEST_CASE("frame of a plane") {
  std::vector<Vec3> pts;
  for (int i = 0; i < 8; ++i) pts.emplace_back(std::cos(i * 0.8) * (1 + 0.1 * i), std::sin(i * 0.8), 0.0);
  const auto f = local::estimate_frame(pts, pts[0]);
  CHECK(std::abs(std::abs(f.t3.z()) - 1.0) < 1e-6);
  const Vec3 lifted = local::lift_to_tangent(f, {0.3, -0.7});
  CHECK(std::abs(lifted.z()) < 1e-12);
  CHECK(std::abs(f.t1.dot(f.t2)) < 1e-6);
  CHECK(std::abs(f.t1.norm() - 1.0) < 1e-6);
  CHECK((f.t3 - f.t1.cross(f.t2)).norm() < 1e-7);
}

TEST_CASE("frame errors") {
  std::vector<Vec3> line;
  for (int i = 0; i < 8; ++i) line.emplace_back(i, 0, 0);
  CHECK_THROWS_AS(local::estimate_frame(line, line[0]), GeometryError);
  const std::vector<Vec3> few(5, Vec3::Zero());
  CHECK_THROWS_AS(local::estimate_frame(few, few[0]), ArgumentError);
}

TEST_CASE("sphere cap frame and curvature") {
  const auto cap = sphere_cap(0.2, 3, 8);
  const auto f = local::estimate_frame(cap, cap[0]);
  CHECK(angle_deg(f.t3, Vec3(0, 0, -1)) < 3.0);
  const auto forms = local::fit_fundamental_forms(cap, f);
  CHECK_FALSE(forms.degenerate);
  CHECK(std::abs(forms.k1 - 1.0) < 0.1);
  CHECK(std::abs(forms.k2 - 1.0) < 0.1);
  CHECK(forms.k1 >= forms.k2);
  CHECK(std::abs(forms.dir1.dot(forms.dir2)) < 1e-6);
}

TEST_CASE("cylinder curvature") {
  std::vector<Vec3> pts{Vec3(2, 0, 0)};
  for (int i = -3; i <= 3; ++i)
    for (int j = -3; j <= 3; ++j) {
      if (i == 0 && j == 0) continue;
      const double a = 0.05 * i;
      pts.emplace_back(2 * std::cos(a), 2 * std::sin(a), 0.1 * j);
    }
  const auto f = local::estimate_frame(pts, pts[0]);
  const auto forms = local::fit_fundamental_forms(pts, f);
  CHECK(forms.k1 == doctest::Approx(0.5).epsilon(0.1));
  CHECK(std::abs(forms.k2) < 0.05);
}

TEST_CASE("exact plane has zero curvature") {
  Pcg32 rng(2);
  std::vector<Vec3> pts{Vec3(0.5, 0.5, 0.3)};
  for (int i = 0; i < 15; ++i) {
    const double x = rng.uniform(), y = rng.uniform();
    pts.emplace_back(x, y, 0.2 * x + 0.4 * y + 0.1);
  }
  pts[0].z() = 0.2 * 0.5 + 0.4 * 0.5 + 0.1;
  const auto f = local::estimate_frame(pts, pts[0]);
  const auto forms = local::fit_fundamental_forms(pts, f);
  CHECK(std::abs(forms.k1) < 1e-6);
  CHECK(std::abs(forms.k2) < 1e-6);
}

TEST_CASE("exact quadric coefficients are recovered") {
  const double e = 0.8, fc = -0.3, g = 1.7;
  Pcg32 rng(12);
  std::vector<Vec3> pts{Vec3::Zero()};
  for (int i = 0; i < 20; ++i) {
    const double u = rng.uniform(-0.3, 0.3), v = rng.uniform(-0.3, 0.3);
    pts.emplace_back(u, v, 0.5 * (e * u * u + 2 * fc * u * v + g * v * v));
  }
  const auto forms = local::fit_fundamental_forms(pts, identity_frame());
  CHECK(std::abs(forms.e - e) < 1e-8);
  CHECK(std::abs(forms.f - fc) < 1e-8);
  CHECK(std::abs(forms.g - g) < 1e-8);
  // Eigenvalues of [[e f][f g]] by the closed form.
  const double mean = 0.5 * (e + g), half = std::sqrt(0.25 * (e - g) * (e - g) + fc * fc);
  CHECK(forms.k1 == doctest::Approx(mean + half).epsilon(1e-10));
  CHECK(forms.k2 == doctest::Approx(mean - half).epsilon(1e-10));
}

TEST_CASE("degenerate fit is flagged") {
  // All neighbors on one line through the origin: the v terms are unconstrained.
  std::vector<Vec3> pts;
  for (int i = 0; i < 8; ++i) pts.emplace_back(0.1 * i, 0.0, 0.01 * i * i);
  const auto forms = local::fit_fundamental_forms(pts, identity_frame());
  CHECK(forms.degenerate);
  CHECK(forms.k1 == 0.0);
  CHECK(forms.k2 == 0.0);
}

TEST_CASE("rigid motion equivariance and scaling") {
  const auto cap = sphere_cap(0.3, 3, 9);
  const auto f0 = local::estimate_frame(cap, cap[0]);
  const auto k0 = local::fit_fundamental_forms(cap, f0);
  Pcg32 rng(8);
  const Mat3 R = sampling::random_rotation(rng);
  const Vec3 shift(1, -2, 3);
  std::vector<Vec3> moved;
  for (const auto& p : cap) moved.push_back(R * p + shift);
  const auto f1 = local::estimate_frame(moved, moved[0]);
  const auto k1 = local::fit_fundamental_forms(moved, f1);
  CHECK(std::abs((R * f0.t3).dot(f1.t3)) >= 1 - 1e-6);
  CHECK(std::abs(k1.k1 - k0.k1) < 1e-6);
  CHECK(std::abs(k1.k2 - k0.k2) < 1e-6);

  const auto big = sphere_cap(0.3, 3, 9, 2.0);
  const auto kb = local::fit_fundamental_forms(big, local::estimate_frame(big, big[0]));
  CHECK(k0.k1 / kb.k1 == doctest::Approx(2.0).epsilon(0.05));
  CHECK(k0.k2 / kb.k2 == doctest::Approx(2.0).epsilon(0.05));
}

TEST_CASE("normal_from_T, lift and displacement") {
  auto f = identity_frame();
  CHECK(local::normal_from_T(f) == Vec3(0, 0, 1));
  f.t3 = Vec3(0, 1, 0);
  CHECK(local::normal_from_T(f) == Vec3(0, 1, 0));
  const auto id = identity_frame();
  CHECK(local::lift_to_tangent(id, {0.2, 0.5}) == Vec3(0.2, 0.5, 0));
  CHECK(local::lift_to_tangent(id, {0, 0}) == id.origin);

  Pcg32 rng(3);
  const Mat3 R = sampling::random_rotation(rng);
  local::AugmentedJacobian rf;
  rf.origin = Vec3(1, 2, 3);
  rf.t1 = R.col(0);
  rf.t2 = R.col(1);
  rf.t3 = R.col(2);
  const Vec3 x = local::lift_to_tangent(rf, {rng.uniform(), rng.uniform()});
  CHECK(std::abs((x - rf.origin).dot(rf.t1.cross(rf.t2))) < 1e-6);

  local::FundamentalForms flat;
  CHECK(local::normal_displacement(flat, {0.4, 0.1}) == 0.0);
  local::FundamentalForms bent = local::forms_from_coefficients(2.0, 0.0, 0.0);
  CHECK(local::normal_displacement(bent, {0.1, 0.3}) == doctest::Approx(0.01));
  const auto unit = local::forms_from_coefficients(1.0, 0.0, 1.0);
  CHECK(local::normal_displacement(unit, {0.06, 0.08}) == doctest::Approx(0.005));
}

TEST_CASE("quadric normal") {
  const auto f = identity_frame();
  const auto forms = local::forms_from_coefficients(1.0, 0.0, 1.0);
  CHECK(local::quadric_normal(forms, {0, 0}, f) == f.t3);
  const auto flat = local::forms_from_coefficients(0.0, 0.0, 0.0);
  CHECK(local::quadric_normal(flat, {0.3, -0.2}, f).isApprox(f.t3));

  // Unit sphere tangent at (0,0,-1) seen from inside: frame at the south pole
  // with t3 toward the center, displaced point's true normal is radial.
  local::AugmentedJacobian s;
  s.origin = Vec3(0, 0, -1);
  s.t1 = Vec3::UnitX();
  s.t2 = Vec3::UnitY();
  s.t3 = Vec3::UnitZ();
  const local::ParamSample uv{0.1, 0.0};
  const Vec3 p = local::lift_to_tangent(s, uv) + local::normal_displacement(forms, uv) * s.t3;
  const Vec3 n = local::quadric_normal(forms, uv, s);
  CHECK(std::abs(n.norm() - 1.0) < 1e-12);
  CHECK(angle_deg(n, -p.normalized()) < 2.0);
}

TEST_CASE("frame statistics") {
  auto f = identity_frame();
  CHECK(local::frame_angle_deg(f) == doctest::Approx(0.0));
  auto swapped = f;
  swapped.t3 = f.t2;
  CHECK(local::frame_angle_deg(swapped) == doctest::Approx(90.0));
  auto broken = f;
  broken.t3 = Vec3::Zero();
  const std::vector<local::AugmentedJacobian> frames{f, swapped, broken};
  const std::vector<double> deltas{0.0, 0.0, 0.0, 0.0};
  const auto stats = local::frame_stats(frames, deltas);
  CHECK(stats.degenerate == 1);
  CHECK(stats.theta.counts.size() == 30);
  CHECK(stats.delta.counts.size() == 50);
  CHECK(stats.theta.counts.front() == 1);
  CHECK(stats.theta.counts.back() == 1);
  const auto mode = stats.delta.mode();
  CHECK(stats.delta.bin_lo(mode) <= 0.0);
  CHECK(stats.delta.bin_hi(mode) >= 0.0);
  CHECK(stats.to_tsv().find("section\tdelta") != std::string::npos);
}
