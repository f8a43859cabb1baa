#include "doctest.h"

#include "geoup/error.hpp"
#include "geoup/losses.hpp"
#include "geoup/model.hpp"

#include "../support/model_helpers.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <vector>

using namespace geoup;
using ad::Tensor;
namespace fs = std::filesystem;

namespace {

template <class T>
void fill(nn::Mlp<T>& mlp, double value) {
  for (auto& l : mlp.layers) {
    for (auto& w : l.weight.mutable_values()) w = static_cast<T>(value);
    for (auto& b : l.bias.mutable_values()) b = static_cast<T>(value);
  }
}

std::vector<int> identity_rank(std::size_t n) {
  std::vector<int> r(n);
  for (std::size_t i = 0; i < n; ++i) r[i] = static_cast<int>(i);
  return r;
}

model::ModelConfig small_config() {
  model::ModelConfig c = testing::tiny_config();
  c.patch_size = 16;
  c.factor = 4;
  c.features = {8, 8, 8};
  return c;
}

}  // namespace

TEST_CASE("config validation and json round trip") {
  model::ModelConfig c = small_config();
  c.validate();
  c.coarse_to_fine = false;
  c.seed = 99;
  const auto back = model::ModelConfig::from_json(c.to_json());
  CHECK(back.to_json() == c.to_json());
  CHECK(c.total_features() == 24);
  model::ModelConfig bad = c;
  bad.features = {};
  CHECK_THROWS_AS(bad.validate(), ArgumentError);
  bad = c;
  bad.neighbors = c.patch_size;
  CHECK_THROWS_AS(bad.validate(), ArgumentError);
}

TEST_CASE("stn starts at identity and is permutation invariant") {
  const auto cfg = small_config();
  auto params = model::init_params(cfg);
  const auto pts = testing::random_cap(cfg.patch_size, 1);
  const auto X = losses::from_points<float>(pts);
  const auto out = model::stn_forward(params, X);
  CHECK(out.A.shape() == ad::Shape{3, 3});
  for (std::size_t i = 0; i < 9; ++i) CHECK(out.A[i] == (i % 4 == 0 ? 1.0f : 0.0f));
  for (std::size_t i = 0; i < out.aligned.size(); ++i) CHECK(out.aligned[i] == X[i]);

  testing::randomize(params, 4);
  std::vector<Vec3> rev(pts.rbegin(), pts.rend());
  const auto a = model::stn_forward(params, X);
  const auto b = model::stn_forward(params, losses::from_points<float>(rev));
  for (std::size_t i = 0; i < 9; ++i) CHECK(a.A[i] == b.A[i]);
  const std::size_t n = pts.size();
  for (std::size_t i = 0; i < n; ++i)
    for (int d = 0; d < 3; ++d) CHECK(a.aligned[3 * i + d] == b.aligned[3 * (n - 1 - i) + d]);
}

TEST_CASE("feature knn") {
  const auto two = Tensor<double>::constant({2, 3}, {0, 0, 0, 1, 0, 0});
  const auto r = identity_rank(2);
  CHECK(model::feature_knn(two, 1, r) == std::vector<int>{1, 0});
  CHECK_THROWS_AS(model::feature_knn(two, 2, r), ArgumentError);
  // Point 0 is equidistant from 1 and 2: the lower rank wins.
  const auto three = Tensor<double>::constant({3, 1}, {0, 1, -1});
  CHECK(model::feature_knn(three, 1, std::vector<int>{0, 2, 1})[0] == 2);
  CHECK(model::feature_knn(three, 1, std::vector<int>{0, 1, 2})[0] == 1);
}

TEST_CASE("canonical rank") {
  const std::vector<Vec3> p{{1, 0, 0}, {0, 5, 0}, {0, 1, 0}, {0, 1, 0}};
  CHECK(model::canonical_rank(p) == std::vector<int>{3, 2, 0, 1});
}

TEST_CASE("hierarchical feature shapes") {
  const auto cfg = small_config();
  auto params = model::init_params(cfg);
  const auto pts = testing::random_cap(cfg.patch_size, 2);
  const auto feats = model::extract_features(params, cfg, losses::from_points<float>(pts), model::canonical_rank(pts));
  REQUIRE(feats.size() == 3);
  for (std::size_t l = 0; l < 3; ++l) CHECK(feats[l].shape() == ad::Shape{cfg.patch_size, cfg.features[l]});
}

TEST_CASE("recalibration gate") {
  auto cfg = small_config();
  auto params = model::init_params(cfg);
  Pcg32 rng(3);
  std::vector<Tensor<float>> levels;
  for (int l = 0; l < 3; ++l) {
    std::vector<float> v(cfg.patch_size * 8);
    for (auto& x : v) x = static_cast<float>(rng.uniform(-1, 1));
    levels.push_back(Tensor<float>::constant({cfg.patch_size, 8}, v));
  }
  auto& last = params.recal.layers.back();
  for (auto& w : last.weight.mutable_values()) w = 0.0f;
  for (auto& b : last.bias.mutable_values()) b = 0.0f;
  Tensor<float> gate;
  const auto c = model::recalibrate(params, cfg, levels, &gate);
  REQUIRE(c.shape() == ad::Shape{cfg.patch_size, 24});
  for (std::size_t i = 0; i < cfg.patch_size; ++i)
    for (std::size_t f = 0; f < 24; ++f)
      CHECK(c[i * 24 + f] == doctest::Approx(levels[f / 8][i * 8 + f % 8] / 3.0f));

  last.bias.mutable_values()[0] = std::log(2.0f);
  model::recalibrate(params, cfg, levels, &gate);
  CHECK(gate[0] == doctest::Approx(0.5));
  CHECK(gate[1] == doctest::Approx(0.25));
  CHECK(gate[2] == doctest::Approx(0.25));

  cfg.recalibration = false;
  const auto plain = model::recalibrate(params, cfg, levels);
  CHECK(plain[8] == levels[1][0]);

  auto one = small_config();
  one.features = {8};
  auto p1 = model::init_params(one);
  testing::randomize(p1, 8);
  const std::vector<Tensor<float>> single{levels[0]};
  const auto c1 = model::recalibrate(p1, one, single);
  for (std::size_t i = 0; i < c1.size(); ++i) CHECK(c1[i] == doctest::Approx(levels[0][i]));
}

TEST_CASE("expansion at init and with zero uv") {
  const auto cfg = small_config();
  auto params = model::init_params(cfg);
  const std::size_t N = cfg.patch_size, R = cfg.factor, F = cfg.total_features();
  Pcg32 rng(5);
  std::vector<float> cv(N * F);
  for (auto& x : cv) x = static_cast<float>(rng.uniform(-1, 1));
  const auto c = Tensor<float>::constant({N, F}, cv);
  const auto pts = testing::random_cap(N, 6);
  const auto X = losses::from_points<float>(pts);
  const auto e = model::expand(params, cfg, c, X);
  CHECK(e.uv.shape() == ad::Shape{N * R, 2});
  CHECK(e.transform.shape() == ad::Shape{N, 9});
  CHECK(e.xhat.shape() == ad::Shape{N * R, 3});
  CHECK(e.coarse_normals.shape() == ad::Shape{N, 3});
  for (std::size_t i = 0; i < N; ++i) {
    for (int k = 0; k < 9; ++k) CHECK(e.transform[i * 9 + k] == (k % 4 == 0 ? 1.0f : 0.0f));
    CHECK(e.coarse_normals[3 * i + 2] == 1.0f);
    for (std::size_t r = 0; r < R; ++r) {
      const std::size_t j = i * R + r;
      CHECK(e.xhat[3 * j] == X[3 * i] + e.uv[2 * j]);
      CHECK(e.xhat[3 * j + 1] == X[3 * i + 1] + e.uv[2 * j + 1]);
      CHECK(e.xhat[3 * j + 2] == X[3 * i + 2]);
    }
  }
  auto zero_uv = params;
  fill(zero_uv.uv, 0.0);
  testing::randomize(zero_uv, 11);
  fill(zero_uv.uv, 0.0);
  const auto z = model::expand(zero_uv, cfg, c, X);
  for (std::size_t j = 0; j < N * R; ++j)
    for (int d = 0; d < 3; ++d) CHECK(z.xhat[3 * j + d] == X[3 * (j / R) + d]);
}

TEST_CASE("refinement identities") {
  const auto cfg = small_config();
  auto params = model::init_params(cfg);
  const std::size_t N = cfg.patch_size, R = cfg.factor, F = cfg.total_features();
  Pcg32 rng(7);
  std::vector<float> cv(N * F);
  for (auto& x : cv) x = static_cast<float>(rng.uniform(-1, 1));
  const auto c = Tensor<float>::constant({N, F}, cv);
  const auto X = losses::from_points<float>(testing::random_cap(N, 8));
  const auto e0 = model::expand(params, cfg, c, X);
  const auto r0 = model::refine(params, cfg, e0, c, X);
  for (std::size_t i = 0; i < r0.points.size(); ++i) CHECK(r0.points[i] == e0.xhat[i]);
  for (std::size_t j = 0; j < N * R; ++j)
    for (int d = 0; d < 3; ++d) CHECK(r0.normals[3 * j + d] == e0.coarse_normals[3 * (j / R) + d]);

  testing::randomize(params, 12);
  const auto e = model::expand(params, cfg, c, X);
  const auto r = model::refine(params, cfg, e, c, X);
  for (std::size_t j = 0; j < N * R; ++j) {
    const std::size_t i = j / R;
    const float delta = r.deltas[j];
    for (int d = 0; d < 3; ++d) {
      const float col3 = e.transform[i * 9 + d * 3 + 2];
      CHECK(r.points[3 * j + d] - e.xhat[3 * j + d] == doctest::Approx(delta * col3).epsilon(1e-5));
    }
    const double len = std::sqrt(r.normals[3 * j] * r.normals[3 * j] + r.normals[3 * j + 1] * r.normals[3 * j + 1] +
                                 r.normals[3 * j + 2] * r.normals[3 * j + 2]);
    CHECK(std::abs(len - 1.0) < 1e-6);
  }
}

TEST_CASE("forward at desk-scale defaults") {
  const model::ModelConfig cfg;
  const auto params = model::init_params(cfg);
  const auto patch = testing::random_cap(256, 9);
  const auto out = model::forward<float>(params, cfg, patch);
  const auto res = model::to_upsample_result(out, cfg.factor);
  CHECK(res.points.size() == 1024);
  CHECK(res.normals.size() == 1024);
  CHECK(res.coarse_normals.size() == 256);
  for (std::size_t j = 0; j < 1024; ++j) CHECK(res.parent[j] == static_cast<int>(j / 4));
  for (double d : model::transform_determinants(out.transform)) CHECK(d == 1.0);
  const std::vector<Vec3> short_patch(patch.begin(), patch.begin() + 100);
  CHECK_THROWS_AS(model::forward<float>(params, cfg, short_patch), ArgumentError);
}

TEST_CASE("fixed grid at init replicates the input through T = I") {
  auto cfg = small_config();
  cfg.learned_sampling = false;
  const auto params = model::init_params(cfg);
  const auto patch = testing::random_cap(cfg.patch_size, 10);
  const auto out = model::forward<float>(params, cfg, patch);
  const auto again = model::forward<float>(params, cfg, patch);
  for (std::size_t j = 0; j < cfg.patch_size * cfg.factor; ++j) {
    const Vec3& src = patch[j / cfg.factor];
    const float u = out.uv[2 * j], v = out.uv[2 * j + 1];
    CHECK(out.points[3 * j] == doctest::Approx(src.x() + u).epsilon(1e-6));
    CHECK(out.points[3 * j + 1] == doctest::Approx(src.y() + v).epsilon(1e-6));
    CHECK(out.points[3 * j + 2] == doctest::Approx(src.z()).epsilon(1e-6));
    CHECK(again.uv[2 * j] == u);
  }
}

TEST_CASE("checkpoint round trip and errors") {
  auto cfg = small_config();
  cfg.factor = 3;
  auto params = model::init_params(cfg);
  testing::randomize(params, 13);
  const fs::path dir = fs::temp_directory_path() / "geoup_unit_model";
  fs::create_directories(dir);
  const fs::path path = dir / "m.pugeo";
  model::save_model(params, cfg, path);
  const auto ck = model::load_model(path);
  CHECK(ck.config.factor == 3);
  CHECK(ck.config.to_json() == cfg.to_json());
  auto loaded = ck.params;
  auto a = model::named_parameters(params);
  auto b = model::named_parameters(loaded);
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].first == b[i].first);
    const auto av = a[i].second->values();
    const auto bv = b[i].second->values();
    CHECK(std::equal(av.begin(), av.end(), bv.begin(), bv.end()));
  }

  const std::string bytes = model::serialize_model(params, cfg);
  CHECK(bytes.rfind("PUGEO1", 0) == 0);
  CHECK_THROWS_AS(model::deserialize_model(bytes.substr(0, bytes.size() - 5)), CorruptionError);
  CHECK_THROWS_AS(model::deserialize_model("PUGEO2" + bytes.substr(6)), FormatError);
  CHECK_THROWS_AS(model::deserialize_model(bytes + "x"), CorruptionError);
}
