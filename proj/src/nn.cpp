#include "geoup/nn.hpp"

#include "geoup/error.hpp"

#include <cmath>

namespace geoup::nn {

void MlpSpec::validate() const {
  if (widths.size() < 2) throw ArgumentError("mlp: need at least input and output widths");
  for (auto w : widths) {
    if (w == 0) throw ArgumentError("mlp: widths must be positive");
  }
}

Mlp<float> make_mlp(const MlpSpec& spec, Pcg32& rng, Init init) {
  spec.validate();
  Mlp<float> mlp;
  mlp.spec = spec;
  for (std::size_t l = 0; l + 1 < spec.widths.size(); ++l) {
    const std::size_t in = spec.widths[l];
    const std::size_t out = spec.widths[l + 1];
    const bool last = l + 2 == spec.widths.size();
    std::vector<float> w(in * out, 0.0f);
    if (!(last && init == Init::zero_last)) {
      const double limit = std::sqrt(6.0 / static_cast<double>(in + out));
      for (auto& x : w) x = static_cast<float>(rng.uniform(-limit, limit));
    }
    mlp.layers.push_back({Tensor<float>::parameter({in, out}, std::move(w)),
                          Tensor<float>::parameter({out}, std::vector<float>(out, 0.0f))});
  }
  return mlp;
}

template <class T>
Tensor<T> mlp_forward(const Mlp<T>& mlp, const Tensor<T>& input) {
  if (input.rank() != 2 || input.dim(1) != mlp.spec.in()) {
    throw ShapeError("mlp_forward: input shape " + ad::shape_string(input.shape()) +
                     " does not match input width " + std::to_string(mlp.spec.in()));
  }
  Tensor<T> h = input;
  for (std::size_t l = 0; l < mlp.layers.size(); ++l) {
    h = ad::add_bias(ad::matmul(h, mlp.layers[l].weight), mlp.layers[l].bias);
    if (l + 1 < mlp.layers.size()) h = ad::relu(h);
  }
  return h;
}

template <class T>
void collect_parameters(Mlp<T>& mlp, const std::string& prefix,
                        std::vector<std::pair<std::string, Tensor<T>*>>& out) {
  for (std::size_t l = 0; l < mlp.layers.size(); ++l) {
    out.emplace_back(prefix + "." + std::to_string(l) + ".weight", &mlp.layers[l].weight);
    out.emplace_back(prefix + "." + std::to_string(l) + ".bias", &mlp.layers[l].bias);
  }
}

template <class To, class From>
Mlp<To> cast_mlp(const Mlp<From>& mlp) {
  Mlp<To> out;
  out.spec = mlp.spec;
  for (const auto& layer : mlp.layers) out.layers.push_back({ad::cast<To>(layer.weight), ad::cast<To>(layer.bias)});
  return out;
}

template <class T>
void adam_step(AdamState& state, std::span<Tensor<T>* const> params) {
  if (state.m.empty()) {
    for (auto* p : params) {
      state.m.emplace_back(p->size(), 0.0);
      state.v.emplace_back(p->size(), 0.0);
    }
  }
  if (state.m.size() != params.size()) throw ArgumentError("adam_step: parameter count changed");
  ++state.step;
  const double c1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
  for (std::size_t k = 0; k < params.size(); ++k) {
    Tensor<T>& p = *params[k];
    auto& m = state.m[k];
    auto& v = state.v[k];
    if (m.size() != p.size()) throw ShapeError("adam_step: moment shape does not match parameter");
    const auto g = p.grad();
    auto values = p.mutable_values();
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double gi = g.empty() ? 0.0 : static_cast<double>(g[i]);
      m[i] = state.beta1 * m[i] + (1.0 - state.beta1) * gi;
      v[i] = state.beta2 * v[i] + (1.0 - state.beta2) * gi * gi;
      const double mhat = m[i] / c1;
      const double vhat = v[i] / c2;
      values[i] = static_cast<T>(static_cast<double>(values[i]) - state.lr * mhat / (std::sqrt(vhat) + state.eps));
    }
  }
}

template <class T>
void zero_grads(std::span<Tensor<T>* const> params) {
  for (auto* p : params) p->zero_grad();
}

template Tensor<float> mlp_forward<float>(const Mlp<float>&, const Tensor<float>&);
template Tensor<double> mlp_forward<double>(const Mlp<double>&, const Tensor<double>&);
template void collect_parameters<float>(Mlp<float>&, const std::string&,
                                        std::vector<std::pair<std::string, Tensor<float>*>>&);
template void collect_parameters<double>(Mlp<double>&, const std::string&,
                                         std::vector<std::pair<std::string, Tensor<double>*>>&);
template Mlp<double> cast_mlp<double, float>(const Mlp<float>&);
template Mlp<float> cast_mlp<float, double>(const Mlp<double>&);
template Mlp<float> cast_mlp<float, float>(const Mlp<float>&);
template Mlp<double> cast_mlp<double, double>(const Mlp<double>&);
template void adam_step<float>(AdamState&, std::span<Tensor<float>* const>);
template void adam_step<double>(AdamState&, std::span<Tensor<double>* const>);
template void zero_grads<float>(std::span<Tensor<float>* const>);
template void zero_grads<double>(std::span<Tensor<double>* const>);

}  // namespace geoup::nn
