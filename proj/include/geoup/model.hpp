#pragma once

#include "geoup/autodiff.hpp"
#include "geoup/geometry.hpp"
#include "geoup/nn.hpp"

#include "json.hpp"

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace geoup::model {

using ad::Tensor;

struct ModelConfig {
  std::size_t factor = 4;        // R
  std::size_t patch_size = 256;  // N
  std::size_t neighbors = 8;     // k of the edge features
  std::vector<std::size_t> features{32, 64, 128};
  std::size_t recalibration_hidden = 64;
  std::size_t expansion_hidden = 128;
  std::size_t transform_hidden = 128;
  std::size_t refine_hidden = 64;

  bool recalibration = true;
  bool learned_sampling = true;
  bool linear_transform = true;
  bool coarse_to_fine = true;
  bool predict_normals = true;
  /// Recompute the neighbor graph in feature space at every level after the first.
  bool dynamic_graph = true;

  /// Seeds weight initialization and the fixed sampling grid.
  std::uint64_t seed = 42;

  std::size_t levels() const { return features.size(); }
  std::size_t total_features() const;
  void validate() const;

  nlohmann::ordered_json to_json() const;
  static ModelConfig from_json(const nlohmann::json& j);
};

template <class T>
struct ModelParams {
  nn::Mlp<T> stn_point;   // 3 -> 16 -> 32, max-pooled
  nn::Mlp<T> stn_head;    // 32 -> 16 -> 9
  std::vector<nn::Mlp<T>> edge;  // level l: 2 F_{l-1} -> F_l -> F_l
  nn::Mlp<T> recal;       // F -> hidden -> L
  nn::Mlp<T> uv;          // f1: F -> hidden -> 2R
  nn::Mlp<T> transform;   // f2: F -> hidden -> 9
  nn::Mlp<T> offset;      // f3: F+3 -> hidden -> 1
  nn::Mlp<T> normal;      // f4: F+3 -> hidden -> 3
  nn::Mlp<T> direct;      // no linear transform: F -> hidden -> 3R+3
  nn::Mlp<T> one_shot;    // no coarse-to-fine: F+2 -> hidden -> 6 (or 3)
};

/// Fresh parameters. Residual heads (STN output, f2, f3, f4) start at zero so
/// A = I, T = I, delta = 0 and the refined normal equals the coarse one.
ModelParams<float> init_params(const ModelConfig& config);

template <class T>
std::vector<std::pair<std::string, Tensor<T>*>> named_parameters(ModelParams<T>& params);

template <class To, class From>
ModelParams<To> cast_params(const ModelParams<From>& params);

/// Rank of every point in lexicographic (x, y, z) order, index on ties. Used
/// to break neighbor distance ties independently of input order.
std::vector<int> canonical_rank(std::span<const Vec3> points);

/// k nearest other rows of a [n, f] feature matrix, ascending distance, ties
/// by rank. Returns n*k indices.
template <class T>
std::vector<int> feature_knn(const Tensor<T>& features, std::size_t k, std::span<const int> rank);

template <class T>
struct StnOutput {
  Tensor<T> aligned;  // [N,3] = points * A^T
  Tensor<T> A;        // [3,3]
};

template <class T>
StnOutput<T> stn_forward(const ModelParams<T>& params, const Tensor<T>& points);

template <class T>
std::vector<Tensor<T>> extract_features(const ModelParams<T>& params, const ModelConfig& config,
                                        const Tensor<T>& points, std::span<const int> rank);

/// Weighted concatenation of the level features; `weights` receives the
/// softmax gate [N, L] when recalibration is on.
template <class T>
Tensor<T> recalibrate(const ModelParams<T>& params, const ModelConfig& config,
                      const std::vector<Tensor<T>>& levels, Tensor<T>* weights = nullptr);

template <class T>
struct Expansion {
  Tensor<T> uv;              // [N*R, 2]
  Tensor<T> transform;       // [N, 9], row-major 3x3 per point
  Tensor<T> xhat;            // [N*R, 3]
  Tensor<T> coarse_normals;  // [N, 3]
};

template <class T>
Expansion<T> expand(const ModelParams<T>& params, const ModelConfig& config, const Tensor<T>& c,
                    const Tensor<T>& points);

template <class T>
struct Refinement {
  Tensor<T> points;   // [N*R, 3]
  Tensor<T> normals;  // [N*R, 3]
  Tensor<T> deltas;   // [N*R, 1]
};

template <class T>
Refinement<T> refine(const ModelParams<T>& params, const ModelConfig& config, const Expansion<T>& e,
                     const Tensor<T>& c, const Tensor<T>& points);

template <class T>
struct ModelOutput {
  Tensor<T> points;          // [N*R, 3], input coordinates
  Tensor<T> normals;         // [N*R, 3], unit
  Tensor<T> coarse_normals;  // [N, 3], unit
  Tensor<T> deltas;          // [N*R, 1]
  Tensor<T> uv;
  Tensor<T> transform;  // aligned coordinates
  Tensor<T> xhat;       // aligned coordinates
  Tensor<T> alignment;  // A
  Tensor<T> gate;       // [N, L] or undefined
};

/// Full pass over one normalized patch of exactly config.patch_size points.
template <class T>
ModelOutput<T> forward(const ModelParams<T>& params, const ModelConfig& config, std::span<const Vec3> patch);

template <class T>
UpsampleResult to_upsample_result(const ModelOutput<T>& out, std::size_t factor);

/// det(T_i) per point.
template <class T>
std::vector<double> transform_determinants(const Tensor<T>& transform);

struct Checkpoint {
  ModelConfig config;
  ModelParams<float> params;
};

void save_model(const ModelParams<float>& params, const ModelConfig& config, const std::filesystem::path& path);
std::string serialize_model(const ModelParams<float>& params, const ModelConfig& config);
Checkpoint load_model(const std::filesystem::path& path);
Checkpoint deserialize_model(const std::string& bytes);

}  // namespace geoup::model
