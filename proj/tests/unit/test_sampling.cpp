#include "doctest.h"

#include "geoup/error.hpp"
#include "geoup/sampling.hpp"

#include "../support/shapes.hpp"

#include <Eigen/Geometry>

#include <algorithm>
#include <cmath>
#include <vector>

using namespace geoup;

namespace {

double min_dist_to_set(const std::vector<Vec3>& pts, int i, const std::vector<int>& set) {
  double best = INFINITY;
  for (int s : set) best = std::min(best, (pts[i] - pts[s]).norm());
  return best;
}

TriangleMesh unit_square() {
  TriangleMesh m;
  m.vertices = {{0, 0, 0}, {1, 0, 0}, {1, 1, 0}, {0, 1, 0}};
  m.triangles = {{0, 1, 2}, {0, 2, 3}};
  m.normals = compute_vertex_normals(m);
  return m;
}

}  // namespace

TEST_CASE("farthest point sampling examples") {
  const std::vector<Vec3> line{{0, 0, 0}, {1, 0, 0}, {2, 0, 0}, {10, 0, 0}};
  CHECK(sampling::farthest_point_sample(line, 1, 0) == std::vector<int>{0});
  CHECK(sampling::farthest_point_sample(line, 3, 0) == std::vector<int>{0, 3, 2});
  auto all = sampling::farthest_point_sample(line, 4, 0);
  std::sort(all.begin(), all.end());
  CHECK(all == std::vector<int>{0, 1, 2, 3});
  CHECK_THROWS_AS(sampling::farthest_point_sample(line, 5, 0), ArgumentError);
}

TEST_CASE("farthest point sampling is greedy") {
  Pcg32 rng(4);
  std::vector<Vec3> pts(64);
  for (auto& p : pts) p = Vec3(rng.uniform(), rng.uniform(), rng.uniform());
  const auto sel = sampling::farthest_point_sample(pts, 40, 5);
  CHECK(sel[0] == 5);
  for (std::size_t s = 1; s < sel.size(); ++s) {
    const std::vector<int> before(sel.begin(), sel.begin() + s);
    const double picked = min_dist_to_set(pts, sel[s], before);
    for (int j = 0; j < 64; ++j) {
      if (std::find(sel.begin(), sel.begin() + s + 1, j) != sel.begin() + s + 1) continue;
      CHECK(picked >= min_dist_to_set(pts, j, before));
    }
  }
}

TEST_CASE("poisson disk sampling") {
  const TriangleMesh sq = unit_square();
  const PointCloud one = sampling::poisson_disk_sample(sq, 1, 3);
  REQUIRE(one.size() == 1);
  CHECK(std::abs(one.points[0].z()) < 1e-6);

  const PointCloud c = sampling::poisson_disk_sample(sq, 100, 3);
  REQUIRE(c.size() == 100);
  const double bound = 0.5 * std::sqrt(2.0 * 1.0 / (std::sqrt(3.0) * 100));
  double dmin = INFINITY;
  for (std::size_t i = 0; i < c.size(); ++i)
    for (std::size_t j = i + 1; j < c.size(); ++j) dmin = std::min(dmin, (c.points[i] - c.points[j]).norm());
  CHECK(dmin >= bound);
  for (const auto& n : c.normals) CHECK(n.isApprox(Vec3(0, 0, 1)));

  const PointCloud again = sampling::poisson_disk_sample(sq, 100, 3);
  CHECK(again.points == c.points);

  // Samples lie on the surface of a closed mesh.
  const TriangleMesh sphere = testing::icosphere(2);
  const PointCloud s = sampling::poisson_disk_sample(sphere, 300, 8);
  for (const auto& p : s.points) {
    double best = INFINITY;
    for (const auto& t : sphere.triangles) {
      const Vec3& a = sphere.vertices[t[0]];
      const Vec3 n = (sphere.vertices[t[1]] - a).cross(sphere.vertices[t[2]] - a).normalized();
      best = std::min(best, std::abs(n.dot(p - a)));
    }
    CHECK(best < 1e-6);
  }

  TriangleMesh flat;
  flat.vertices = {{0, 0, 0}, {1, 0, 0}, {2, 0, 0}};
  flat.triangles = {{0, 1, 2}};
  CHECK_THROWS_AS(sampling::poisson_disk_sample(flat, 10, 1), GeometryError);
}

TEST_CASE("patch extraction") {
  const PointCloud c = sampling::poisson_disk_sample(testing::icosphere(3), 512, 2);
  const auto whole = sampling::extract_patches(c, 512, 1.0);
  REQUIRE(whole.patches.size() == 1);
  CHECK(whole.patches[0].points.size() == 512);

  const auto set = sampling::extract_patches(c, 256, 3.0);
  CHECK(set.patches.size() == 6);
  for (const auto& p : set.patches) {
    CHECK(p.points.size() == 256);
    Vec3 mean = Vec3::Zero();
    double radius = 0.0;
    for (const auto& q : p.points) {
      mean += q;
      radius = std::max(radius, q.norm());
    }
    CHECK((mean / 256).norm() < 1e-6);
    CHECK(std::abs(radius - 1.0) < 1e-6);
    const auto back = sampling::denormalize(p, p.points);
    for (std::size_t i = 0; i < back.size(); ++i) CHECK((back[i] - c.points[p.indices[i]]).norm() < 1e-6);
  }
  CHECK(sampling::patch_seed_count(512, 256, 3.0) == 6);
  CHECK_THROWS_AS(sampling::extract_patches(c, 600, 1.0), ArgumentError);
}

TEST_CASE("denormalize") {
  sampling::Patch p;
  p.centroid = Vec3(1, 1, 1);
  p.scale = 2.0;
  const std::vector<Vec3> origin{Vec3::Zero()};
  CHECK(sampling::denormalize(p, origin)[0] == Vec3(1, 1, 1));
  sampling::Patch id;
  const std::vector<Vec3> x{{0.3, -2, 5}};
  CHECK(sampling::denormalize(id, x)[0] == x[0]);
}

TEST_CASE("augmentation") {
  sampling::Patch p;
  Pcg32 rng(6);
  for (int i = 0; i < 32; ++i) {
    p.points.emplace_back(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1));
    p.normals.push_back(Vec3(rng.uniform(-1, 1), rng.uniform(-1, 1), 1).normalized());
  }
  sampling::AugmentOptions identity;
  identity.rotate = false;
  identity.scale_lo = identity.scale_hi = 1.0;
  identity.jitter_sigma = 0.0;
  const auto same = sampling::augment(p, rng, identity);
  CHECK(same.points == p.points);
  CHECK(same.normals == p.normals);

  const Mat3 r = sampling::random_rotation(rng);
  CHECK(std::abs(r.determinant() - 1.0) < 1e-6);
  CHECK((r * r.transpose() - Mat3::Identity()).norm() < 1e-12);

  sampling::AugmentOptions no_jitter;
  no_jitter.jitter_sigma = 0.0;
  Pcg32 a(11), b(11);
  const auto out = sampling::augment(p, a, no_jitter);
  CHECK(sampling::augment(p, b, no_jitter).points == out.points);
  for (const auto& n : out.normals) CHECK(std::abs(n.norm() - 1.0) < 1e-12);
  const double ratio = (out.points[0] - out.points[1]).norm() / (p.points[0] - p.points[1]).norm();
  for (int i = 2; i < 32; ++i) {
    const double ri = (out.points[0] - out.points[i]).norm() / (p.points[0] - p.points[i]).norm();
    CHECK(ri == doctest::Approx(ratio).epsilon(1e-12));
  }
  CHECK((ratio >= 0.8 && ratio <= 1.2));

  const auto jittered = sampling::augment(p, a, identity.jitter_sigma == 0.0 ? sampling::AugmentOptions{} : identity);
  CHECK(jittered.points.size() == p.points.size());
}

TEST_CASE("patch fusion") {
  PointCloud a{{Vec3(0, 0, 0), Vec3(1, 0, 0)}, {Vec3(0, 0, 1), Vec3(0, 0, 1)}};
  PointCloud b{{Vec3(1, 0, 0), Vec3(2, 0, 0)}, {Vec3(0, 0, 1), Vec3(0, 0, 1)}};
  const std::vector<PointCloud> parts{a, b};
  const PointCloud fused = sampling::fuse_patches(parts, 3);
  REQUIRE(fused.size() == 3);
  std::vector<double> xs;
  for (const auto& p : fused.points) xs.push_back(p.x());
  std::sort(xs.begin(), xs.end());
  CHECK(xs == std::vector<double>{0, 1, 2});
  CHECK(fused.normals.size() == 3);
  CHECK_THROWS_AS(sampling::fuse_patches(parts, 5), ArgumentError);
}
