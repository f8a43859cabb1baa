#pragma once

#include "geoup/analytic_upsampler.hpp"
#include "geoup/geometry.hpp"
#include "geoup/losses.hpp"
#include "geoup/metrics.hpp"
#include "geoup/model.hpp"
#include "geoup/sampling.hpp"

#include "json.hpp"

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

namespace geoup::train {

/// One sparse/dense patch pair, both in the sparse patch's normalized frame.
struct TrainExample {
  std::vector<Vec3> sparse;
  std::vector<Vec3> sparse_normals;
  std::vector<Vec3> dense;
  std::vector<Vec3> dense_normals;
  Vec3 centroid = Vec3::Zero();
  double scale = 1.0;
  int mesh = 0;
  int seed_index = -1;
};

struct DatasetOptions {
  std::size_t points = 5000;  // M
  std::size_t factor = 4;     // R
  std::size_t patch_size = 256;
  double coverage = 3.0;
  /// Gaussian noise on sparse inputs, in unit-cube units.
  double noise_sigma = 0.0;
  std::uint64_t seed = 42;
};

/// Centers the mesh and scales it uniformly so its longest box side is 1.
TriangleMesh fit_unit_cube(const TriangleMesh& mesh);

struct MeshSamples {
  PointCloud sparse;
  PointCloud dense;
};

/// M sparse and R*M dense Poisson-disk samples of the unit-cube mesh.
MeshSamples sample_mesh(const TriangleMesh& unit_mesh, const DatasetOptions& options, std::size_t mesh_index);

std::vector<TrainExample> build_dataset(std::span<const TriangleMesh> meshes, const DatasetOptions& options);

/// Writes <dir>/manifest.json plus one sparse and one dense xyz per patch.
void write_dataset(const std::filesystem::path& dir, std::span<const TrainExample> examples,
                   const std::vector<std::string>& mesh_names, const DatasetOptions& options);

struct Dataset {
  std::vector<TrainExample> examples;
  DatasetOptions options;
  nlohmann::json manifest;
};

/// Accepts the dataset directory or the manifest path.
Dataset read_dataset(const std::filesystem::path& path);

struct TrainConfig {
  std::size_t epochs = 800;
  std::size_t batch = 8;
  double lr = 1e-3;
  std::uint64_t seed = 42;
  losses::LossOptions loss{};
  bool augment = true;
  sampling::AugmentOptions augment_options{};
  std::size_t checkpoint_every = 50;
};

struct LossRecord {
  std::size_t index = 0;  // step or epoch, 1-based
  double total = 0.0;
  double cd = 0.0;
  double coarse = 0.0;
  double refined = 0.0;

  nlohmann::ordered_json to_json(const char* key) const;
};

struct TrainCallbacks {
  std::function<void(const LossRecord&)> on_epoch;
  std::function<void(std::size_t epoch, const model::ModelParams<float>&)> on_checkpoint;
};

struct TrainResult {
  std::vector<LossRecord> steps;
  std::vector<LossRecord> epochs;
};

/// Effective loss weights: without normal prediction both normal terms are off.
metrics::LossWeights effective_weights(const model::ModelConfig& config, const metrics::LossWeights& w);

/// Loss terms of one example (no augmentation) for inspection and tests.
template <class T>
losses::LossTerms<T> example_loss(const model::ModelParams<T>& params, const model::ModelConfig& config,
                                  const TrainExample& example, const losses::LossOptions& options);

/// Mini-batch Adam on the joint loss. Throws NumericalError with a diagnostic
/// (step, loss terms, gradient norms) on a non-finite loss or gradient.
TrainResult train(const TrainConfig& config, std::span<const TrainExample> dataset,
                  const model::ModelConfig& model_config, model::ModelParams<float>& params,
                  const TrainCallbacks& callbacks = {});

/// Per-patch diagnostics collected while upsampling with the model.
struct ModelTrace {
  std::vector<local::AugmentedJacobian> frames;
  std::vector<double> deltas;
  std::vector<double> determinants;
};

/// Patch extraction, per-patch forward, denormalization and fusion back to
/// exactly R * M points.
PointCloud upsample_with_model(const model::ModelParams<float>& params, const model::ModelConfig& config,
                               const PointCloud& input, double coverage = 3.0, ModelTrace* trace = nullptr);

using Upsampler = std::function<PointCloud(const PointCloud&)>;

Upsampler analytic_upsampler(const analytic::AnalyticOptions& options);
Upsampler model_upsampler(const model::Checkpoint& checkpoint, double coverage = 3.0);

/// Upsamples `input` and scores it against the dense ground truth and mesh.
metrics::MetricReport evaluate(const Upsampler& upsampler, const PointCloud& input,
                               std::span<const Vec3> dense_truth, const TriangleMesh* mesh);

}  // namespace geoup::train
