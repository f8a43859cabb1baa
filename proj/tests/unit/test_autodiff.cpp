#include "doctest.h"

#include "geoup/autodiff.hpp"
#include "geoup/error.hpp"

#include "../support/gradcheck.hpp"

#include <cmath>
#include <vector>

using namespace geoup;
using ad::Tensor;
using T = Tensor<double>;

TEST_CASE("softmax examples") {
  const T a = T::constant({3}, {0, 0, 0});
  const T s = ad::softmax(a, 0);
  for (int i = 0; i < 3; ++i) CHECK(s[i] == doctest::Approx(1.0 / 3));
  const T b = ad::softmax(T::constant({3}, {std::log(2.0), 0, 0}), 0);
  CHECK(b[0] == doctest::Approx(0.5));
  CHECK(b[1] == doctest::Approx(0.25));
  CHECK(b[2] == doctest::Approx(0.25));
}

TEST_CASE("reduce_max example and tie routing") {
  const T a = T::parameter({2, 2}, {1, 5, 3, 2});
  const T m = ad::reduce_max(a, 1);
  REQUIRE(m.shape() == ad::Shape{2});
  CHECK(m[0] == 5);
  CHECK(m[1] == 3);
  const T tie = T::parameter({3}, {2, 2, 1});
  ad::reduce_max(tie, 0).backward();
  CHECK(tie.grad()[0] == 1);
  CHECK(tie.grad()[1] == 0);
}

TEST_CASE("backward examples") {
  const T x = T::parameter({1}, {3});
  ad::sum(ad::square(x)).backward();
  CHECK(x.grad()[0] == 6);

  const T a = T::parameter({2, 2}, {1, 2, 3, 4});
  const T b = T::parameter({2, 1}, {5, 6});
  ad::sum(ad::concat(std::vector<T>{a, b}, 1)).backward();
  for (double g : a.grad()) CHECK(g == 1);
  for (double g : b.grad()) CHECK(g == 1);

  CHECK_THROWS_AS(ad::concat(std::vector<T>{a, b}, 1).backward(), ArgumentError);
}

TEST_CASE("shape errors name both shapes") {
  const T a = T::constant({2, 3}, std::vector<double>(6, 1));
  const T b = T::constant({2, 3}, std::vector<double>(6, 1));
  try {
    ad::matmul(a, b);
    FAIL("expected a shape error");
  } catch (const ShapeError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("(2,3)") != std::string::npos);
  }
  CHECK_THROWS_AS(ad::add(a, T::constant({3, 2}, std::vector<double>(6, 1))), ShapeError);
}

TEST_CASE("leaves accumulate across passes") {
  const T x = T::parameter({1}, {2});
  ad::sum(ad::square(x)).backward();
  ad::sum(ad::square(x)).backward();
  CHECK(x.grad()[0] == 8);
  T y = x;
  y.zero_grad();
  CHECK(x.grad()[0] == 0);
}

TEST_CASE("every op passes a finite difference check") {
  Pcg32 rng(5);
  T a = testing::random_tensor({4, 3}, rng, -1, 1, true);
  T b = testing::random_tensor({3, 5}, rng, -1, 1, true);
  T c = testing::random_tensor({4, 3}, rng, 0.5, 2, true);
  T bias = testing::random_tensor({3}, rng, -1, 1, true);
  T s = testing::random_tensor({4, 1}, rng, -1, 1, true);
  T m = testing::random_tensor({3, 3}, rng, -1, 1, true);
  const std::vector<int> idx{2, 0, 2, 3, 1};
  const std::vector<int> cols{2, 0};
  const testing::NamedTensors all{{"a", &a}, {"b", &b}, {"c", &c}, {"bias", &bias}, {"s", &s}, {"m", &m}};
  const auto loss = [&] {
    T out = testing::probe(ad::matmul(a, b), 1);
    out = ad::add(out, testing::probe(ad::transpose(a), 2));
    out = ad::add(out, testing::probe(ad::mul(a, c), 3));
    out = ad::add(out, testing::probe(ad::sub(a, c), 4));
    out = ad::add(out, testing::probe(ad::minimum(a, ad::scale(c, 0.3)), 5));
    out = ad::add(out, testing::probe(ad::add_bias(a, bias), 6));
    out = ad::add(out, testing::probe(ad::scale_rows(a, s), 7));
    out = ad::add(out, testing::probe(ad::relu(a), 8));
    out = ad::add(out, testing::probe(ad::sqrt(c), 9));
    out = ad::add(out, testing::probe(ad::softmax(a, 1), 10));
    out = ad::add(out, testing::probe(ad::softmax(a, 0), 11));
    out = ad::add(out, testing::probe(ad::reduce_max(a, 0), 12));
    out = ad::add(out, testing::probe(ad::reduce_sum(a, 1), 13));
    out = ad::add(out, ad::mean(ad::square(a)));
    out = ad::add(out, testing::probe(ad::gather_rows(a, idx), 14));
    out = ad::add(out, testing::probe(ad::select_cols(a, cols), 15));
    out = ad::add(out, testing::probe(ad::normalize_rows(c), 16));
    out = ad::add(out, testing::probe(ad::inverse3(ad::add(m, T::constant({3, 3}, {3, 0, 0, 0, 3, 0, 0, 0, 3}))), 17));
    out = ad::add(out, testing::probe(ad::reshape(ad::concat(std::vector<T>{a, c}, 0), {2, 12}), 18));
    out = ad::add(out, testing::probe(ad::add_scalar(c, 1.0), 19));
    return out;
  };
  const auto r = testing::check_gradients(all, loss);
  CHECK(r.checked + r.excluded == 12 + 15 + 12 + 3 + 4 + 9);
  CHECK(r.excluded == 0);
  CHECK(r.max_rel < 1e-4);
  INFO(r.worst);
}

TEST_CASE("cast makes a leaf of the same kind") {
  const Tensor<float> f = Tensor<float>::parameter({2}, {1.5f, -2.0f});
  const T d = ad::cast<double>(f);
  CHECK(d[0] == 1.5);
  CHECK(d[1] == -2.0);
  CHECK(d.requires_grad());
  ad::sum(ad::scale(d, 3.0)).backward();
  CHECK(d.grad()[0] == 3.0);
  CHECK(f.grad().empty());
  CHECK_FALSE(ad::cast<float>(T::constant({1}, {1.0})).requires_grad());
}

TEST_CASE("singular inverse raises") {
  const T z = T::constant({3, 3}, std::vector<double>(9, 0.0));
  CHECK_THROWS_AS(ad::inverse3(z), NumericalError);
}

TEST_CASE("selection trace records discrete choices") {
  const T a = T::constant({3}, {1, -1, 2});
  std::uint64_t d1, d2, d3;
  {
    const ad::SelectionTrace t;
    ad::relu(a);
    d1 = t.digest();
  }
  {
    const ad::SelectionTrace t;
    ad::relu(T::constant({3}, {2, -3, 0.5}));
    d2 = t.digest();
  }
  {
    const ad::SelectionTrace t;
    ad::relu(T::constant({3}, {2, 3, 0.5}));
    d3 = t.digest();
  }
  CHECK(d1 == d2);
  CHECK(d1 != d3);
  CHECK_FALSE(ad::SelectionTrace::active());
}
