#pragma once

#include "geoup/autodiff.hpp"
#include "geoup/rng.hpp"

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace geoup::nn {

using ad::Tensor;

/// Layer widths of a fully connected net, input first. Hidden layers use relu,
/// the output layer is affine.
struct MlpSpec {
  std::vector<std::size_t> widths;

  std::size_t in() const { return widths.front(); }
  std::size_t out() const { return widths.back(); }
  void validate() const;
};

template <class T>
struct Dense {
  Tensor<T> weight;  // [in, out]
  Tensor<T> bias;    // [out]
};

template <class T>
struct Mlp {
  MlpSpec spec;
  std::vector<Dense<T>> layers;
};

enum class Init { glorot, zero_last };

/// Weights uniform in +-sqrt(6 / (fan_in + fan_out)), biases zero. zero_last
/// additionally zeroes the final layer weights so the net starts at 0.
Mlp<float> make_mlp(const MlpSpec& spec, Pcg32& rng, Init init = Init::glorot);

/// input [batch, in] -> [batch, out].
template <class T>
Tensor<T> mlp_forward(const Mlp<T>& mlp, const Tensor<T>& input);

/// Named parameter tensors in layer order ("<prefix>.<i>.weight", ".bias").
template <class T>
void collect_parameters(Mlp<T>& mlp, const std::string& prefix,
                        std::vector<std::pair<std::string, Tensor<T>*>>& out);

template <class To, class From>
Mlp<To> cast_mlp(const Mlp<From>& mlp);

struct AdamState {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::uint64_t step = 0;
  std::vector<std::vector<double>> m;
  std::vector<std::vector<double>> v;
};

/// One bias-corrected Adam update of every parameter from its accumulated
/// grad (a parameter without grad counts as zero gradient). Moments are held
/// in double; the update is rounded to the parameter type.
template <class T>
void adam_step(AdamState& state, std::span<Tensor<T>* const> params);

/// Zeroes accumulated gradients of every parameter.
template <class T>
void zero_grads(std::span<Tensor<T>* const> params);

}  // namespace geoup::nn
