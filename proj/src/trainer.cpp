#include "geoup/trainer.hpp"

#include "geoup/error.hpp"
#include "geoup/io.hpp"
#include "geoup/kdtree.hpp"

#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

namespace geoup::train {

namespace fs = std::filesystem;

TriangleMesh fit_unit_cube(const TriangleMesh& mesh) {
  validate_mesh(mesh);
  const Aabb box = bounding_box(mesh.vertices);
  const double side = box.extent().maxCoeff();
  if (!(side > 0.0)) throw GeometryError("fit_unit_cube: mesh has zero extent");
  const Vec3 center = 0.5 * (box.lo + box.hi);
  TriangleMesh out = mesh;
  for (auto& v : out.vertices) v = (v - center) / side;
  return out;
}

MeshSamples sample_mesh(const TriangleMesh& unit_mesh, const DatasetOptions& options, std::size_t mesh_index) {
  MeshSamples s;
  s.sparse = sampling::poisson_disk_sample(unit_mesh, options.points, mix_seed(options.seed, 2 * mesh_index));
  s.dense = sampling::poisson_disk_sample(unit_mesh, options.factor * options.points,
                                          mix_seed(options.seed, 2 * mesh_index + 1));
  if (options.noise_sigma > 0.0) {
    Pcg32 rng(mix_seed(options.seed, 0x401 + mesh_index));
    for (auto& p : s.sparse.points)
      for (int a = 0; a < 3; ++a) p[a] += options.noise_sigma * rng.normal();
  }
  return s;
}

std::vector<TrainExample> build_dataset(std::span<const TriangleMesh> meshes, const DatasetOptions& options) {
  if (meshes.empty()) throw ArgumentError("build_dataset: no meshes");
  if (options.factor == 0) throw ArgumentError("build_dataset: factor must be >= 1");
  if (options.patch_size == 0 || options.points < options.patch_size) {
    throw ArgumentError("build_dataset: need patch size <= points, got N=" + std::to_string(options.patch_size) +
                        " M=" + std::to_string(options.points));
  }
  std::vector<TrainExample> out;
  for (std::size_t m = 0; m < meshes.size(); ++m) {
    const MeshSamples s = sample_mesh(fit_unit_cube(meshes[m]), options, m);
    const sampling::PatchSet set = sampling::extract_patches(s.sparse, options.patch_size, options.coverage);
    const KdTree dense_tree(s.dense.points);
    for (const auto& patch : set.patches) {
      TrainExample ex;
      ex.sparse = patch.points;
      ex.sparse_normals = patch.normals;
      ex.centroid = patch.centroid;
      ex.scale = patch.scale;
      ex.mesh = static_cast<int>(m);
      ex.seed_index = patch.seed_index;
      const auto idx = dense_tree.knn(s.sparse.points[patch.seed_index], options.factor * options.patch_size);
      std::vector<Vec3> dense(idx.size());
      ex.dense_normals.resize(idx.size());
      for (std::size_t i = 0; i < idx.size(); ++i) {
        dense[i] = s.dense.points[idx[i]];
        ex.dense_normals[i] = s.dense.normals[idx[i]];
      }
      ex.dense = sampling::normalize(patch, dense);
      out.push_back(std::move(ex));
    }
  }
  return out;
}

namespace {

std::string patch_name(std::size_t i, const char* kind) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "patch_%05zu_%s.xyz", i, kind);
  return buf;
}

nlohmann::ordered_json options_json(const DatasetOptions& o) {
  return {{"points", o.points},           {"factor", o.factor}, {"patch_size", o.patch_size},
          {"coverage", o.coverage},       {"noise_sigma", o.noise_sigma}, {"seed", o.seed}};
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot open '" + path.string() + "' for writing");
  f << text;
  if (!f) throw IoError("failed writing '" + path.string() + "'");
}

}  // namespace

void write_dataset(const fs::path& dir, std::span<const TrainExample> examples,
                   const std::vector<std::string>& mesh_names, const DatasetOptions& options) {
  fs::create_directories(dir / "patches");
  nlohmann::ordered_json manifest;
  manifest["meshes"] = mesh_names;
  manifest["patches"] = nlohmann::ordered_json::array();
  for (std::size_t i = 0; i < examples.size(); ++i) {
    const TrainExample& ex = examples[i];
    const std::string sparse = "patches/" + patch_name(i, "sparse");
    const std::string dense = "patches/" + patch_name(i, "dense");
    io::write_xyz({ex.sparse, ex.sparse_normals}, dir / sparse);
    io::write_xyz({ex.dense, ex.dense_normals}, dir / dense);
    manifest["patches"].push_back({{"sparse", sparse},
                                   {"dense", dense},
                                   {"seed_index", ex.seed_index},
                                   {"mesh", ex.mesh},
                                   {"centroid", {ex.centroid.x(), ex.centroid.y(), ex.centroid.z()}},
                                   {"scale", ex.scale}});
  }
  manifest["config"] = options_json(options);
  write_text(dir / "manifest.json", manifest.dump(2) + "\n");
}

Dataset read_dataset(const fs::path& path) {
  const fs::path manifest_path = fs::is_directory(path) ? path / "manifest.json" : path;
  std::ifstream f(manifest_path);
  if (!f) throw IoError("cannot open dataset manifest '" + manifest_path.string() + "'");
  Dataset d;
  try {
    d.manifest = nlohmann::json::parse(f);
    const auto& c = d.manifest.at("config");
    d.options.points = c.at("points").get<std::size_t>();
    d.options.factor = c.at("factor").get<std::size_t>();
    d.options.patch_size = c.at("patch_size").get<std::size_t>();
    d.options.coverage = c.at("coverage").get<double>();
    d.options.noise_sigma = c.at("noise_sigma").get<double>();
    d.options.seed = c.at("seed").get<std::uint64_t>();
  } catch (const nlohmann::json::exception& ex) {
    throw FormatError("bad dataset manifest '" + manifest_path.string() + "': " + ex.what());
  }
  const fs::path root = manifest_path.parent_path();
  for (const auto& p : d.manifest.at("patches")) {
    TrainExample ex;
    const PointCloud sparse = io::read_xyz(root / p.at("sparse").get<std::string>());
    const PointCloud dense = io::read_xyz(root / p.at("dense").get<std::string>());
    if (!sparse.has_normals() || !dense.has_normals()) throw FormatError("dataset patches must carry normals");
    ex.sparse = sparse.points;
    ex.sparse_normals = sparse.normals;
    ex.dense = dense.points;
    ex.dense_normals = dense.normals;
    ex.seed_index = p.value("seed_index", -1);
    ex.mesh = p.value("mesh", 0);
    if (p.contains("centroid")) {
      const auto c = p["centroid"].get<std::vector<double>>();
      if (c.size() == 3) ex.centroid = Vec3(c[0], c[1], c[2]);
    }
    ex.scale = p.value("scale", 1.0);
    d.examples.push_back(std::move(ex));
  }
  return d;
}

nlohmann::ordered_json LossRecord::to_json(const char* key) const {
  return {{key, index}, {"l_total", total}, {"l_cd", cd}, {"l_coarse", coarse}, {"l_refined", refined}};
}

metrics::LossWeights effective_weights(const model::ModelConfig& config, const metrics::LossWeights& w) {
  metrics::LossWeights out = w;
  if (!config.predict_normals) {
    out.beta = 0.0;
    out.gamma = 0.0;
  }
  return out;
}

template <class T>
losses::LossTerms<T> example_loss(const model::ModelParams<T>& params, const model::ModelConfig& config,
                                  const TrainExample& example, const losses::LossOptions& options) {
  const model::ModelOutput<T> out = model::forward(params, config, example.sparse);
  const PointCloud dense{example.dense, example.dense_normals};
  const auto cd = losses::chamfer_loss(out.points, example.dense, options);
  const auto coarse = losses::coarse_normal_loss(out.coarse_normals, example.sparse_normals, options);
  const auto refined = losses::refined_normal_loss(out.points, out.normals, dense, options);
  return losses::joint_loss(cd, coarse, refined, effective_weights(config, options.weights));
}

template losses::LossTerms<float> example_loss<float>(const model::ModelParams<float>&, const model::ModelConfig&,
                                                      const TrainExample&, const losses::LossOptions&);
template losses::LossTerms<double> example_loss<double>(const model::ModelParams<double>&,
                                                        const model::ModelConfig&, const TrainExample&,
                                                        const losses::LossOptions&);

namespace {

TrainExample augmented(const TrainExample& ex, const sampling::AugmentOptions& options, Pcg32& rng) {
  TrainExample out = ex;
  const sampling::AugmentParams p = sampling::draw_augment(options, 1.0, rng);
  sampling::apply_similarity(p, out.sparse, out.sparse_normals);
  sampling::apply_similarity(p, out.dense, out.dense_normals);
  sampling::apply_jitter(p, out.sparse, rng);
  return out;
}

std::string diagnostic(std::size_t step, const LossRecord& r,
                       const std::vector<std::pair<std::string, ad::Tensor<float>*>>& named) {
  std::ostringstream s;
  s << "non-finite training state at step " << step << ": l_total=" << r.total << " l_cd=" << r.cd
    << " l_coarse=" << r.coarse << " l_refined=" << r.refined << "; grad norms:";
  for (const auto& [name, t] : named) {
    double sq = 0.0;
    for (float g : t->grad()) sq += static_cast<double>(g) * g;
    s << " " << name << "=" << std::sqrt(sq);
  }
  return s.str();
}

}  // namespace

TrainResult train(const TrainConfig& config, std::span<const TrainExample> dataset,
                  const model::ModelConfig& model_config, model::ModelParams<float>& params,
                  const TrainCallbacks& callbacks) {
  if (config.batch == 0) throw ArgumentError("train: batch must be >= 1");
  if (config.epochs > 0 && dataset.empty()) throw ArgumentError("train: dataset is empty");
  config.loss.weights.validate();
  for (const auto& ex : dataset) {
    if (ex.sparse.size() != model_config.patch_size || ex.dense.size() != model_config.factor * model_config.patch_size) {
      throw ArgumentError("train: example sizes (" + std::to_string(ex.sparse.size()) + ", " +
                          std::to_string(ex.dense.size()) + ") do not match model N=" +
                          std::to_string(model_config.patch_size) + " R=" + std::to_string(model_config.factor));
    }
  }

  auto named = model::named_parameters(params);
  std::vector<ad::Tensor<float>*> tensors;
  for (auto& [name, t] : named) tensors.push_back(t);
  nn::AdamState adam;
  adam.lr = config.lr;

  TrainResult result;
  std::size_t step = 0;
  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    std::vector<std::size_t> order(dataset.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    Pcg32 shuffle(mix_seed(config.seed, epoch));
    for (std::size_t i = order.size(); i > 1; --i) {
      std::swap(order[i - 1], order[shuffle.below(static_cast<std::uint32_t>(i))]);
    }

    LossRecord epoch_sum;
    epoch_sum.index = epoch;
    std::size_t steps_in_epoch = 0;
    for (std::size_t begin = 0; begin < order.size(); begin += config.batch) {
      const std::size_t end = std::min(order.size(), begin + config.batch);
      const float inv = 1.0f / static_cast<float>(end - begin);
      ++step;
      LossRecord rec;
      rec.index = step;
      nn::zero_grads<float>(tensors);
      for (std::size_t b = begin; b < end; ++b) {
        const TrainExample& raw = dataset[order[b]];
        Pcg32 rng(mix_seed(mix_seed(config.seed, epoch), b));
        const TrainExample ex = config.augment ? augmented(raw, config.augment_options, rng) : raw;
        const auto terms = example_loss<float>(params, model_config, ex, config.loss);
        rec.total += terms.total.item() * inv;
        rec.cd += terms.cd.item() * inv;
        rec.coarse += terms.coarse.item() * inv;
        rec.refined += terms.refined.item() * inv;
        if (!std::isfinite(rec.total)) throw NumericalError(diagnostic(step, rec, named));
        ad::scale(terms.total, inv).backward();
      }
      for (auto* t : tensors) {
        for (float g : t->grad()) {
          if (!std::isfinite(g)) throw NumericalError(diagnostic(step, rec, named));
        }
      }
      nn::adam_step<float>(adam, tensors);
      result.steps.push_back(rec);
      epoch_sum.total += rec.total;
      epoch_sum.cd += rec.cd;
      epoch_sum.coarse += rec.coarse;
      epoch_sum.refined += rec.refined;
      ++steps_in_epoch;
    }
    const double n = static_cast<double>(steps_in_epoch);
    epoch_sum.total /= n;
    epoch_sum.cd /= n;
    epoch_sum.coarse /= n;
    epoch_sum.refined /= n;
    result.epochs.push_back(epoch_sum);
    if (callbacks.on_epoch) callbacks.on_epoch(epoch_sum);
    if (callbacks.on_checkpoint && config.checkpoint_every > 0 && epoch % config.checkpoint_every == 0 &&
        epoch != config.epochs) {
      callbacks.on_checkpoint(epoch, params);
    }
  }
  return result;
}

PointCloud upsample_with_model(const model::ModelParams<float>& params, const model::ModelConfig& config,
                               const PointCloud& input, double coverage, ModelTrace* trace) {
  if (input.size() < config.patch_size) {
    throw ArgumentError("model upsampling needs at least N=" + std::to_string(config.patch_size) +
                        " input points, got " + std::to_string(input.size()));
  }
  const PointCloud coords{input.points, {}};
  const sampling::PatchSet set = sampling::extract_patches(coords, config.patch_size, coverage);
  std::vector<PointCloud> parts;
  parts.reserve(set.patches.size());
  for (const auto& patch : set.patches) {
    const auto out = model::forward<float>(params, config, patch.points);
    const UpsampleResult res = model::to_upsample_result(out, config.factor);
    parts.push_back({sampling::denormalize(patch, res.points), res.normals});
    if (trace != nullptr) {
      const auto t = out.transform.values();
      for (std::size_t i = 0; i < t.size() / 9; ++i) {
        local::AugmentedJacobian f;
        f.origin = input.points[patch.indices[i]];
        f.t1 = Vec3(t[i * 9 + 0], t[i * 9 + 3], t[i * 9 + 6]);
        f.t2 = Vec3(t[i * 9 + 1], t[i * 9 + 4], t[i * 9 + 7]);
        f.t3 = Vec3(t[i * 9 + 2], t[i * 9 + 5], t[i * 9 + 8]);
        trace->frames.push_back(f);
      }
      for (double d : res.deltas) trace->deltas.push_back(d * patch.scale);
      const auto det = model::transform_determinants(out.transform);
      trace->determinants.insert(trace->determinants.end(), det.begin(), det.end());
    }
  }
  return sampling::fuse_patches(parts, config.factor * input.size());
}

Upsampler analytic_upsampler(const analytic::AnalyticOptions& options) {
  return [options](const PointCloud& input) {
    const auto res = analytic::upsample_analytic(input.points, options);
    return PointCloud{res.result.points, res.result.normals};
  };
}

Upsampler model_upsampler(const model::Checkpoint& checkpoint, double coverage) {
  return [checkpoint, coverage](const PointCloud& input) {
    return upsample_with_model(checkpoint.params, checkpoint.config, input, coverage);
  };
}

metrics::MetricReport evaluate(const Upsampler& upsampler, const PointCloud& input,
                               std::span<const Vec3> dense_truth, const TriangleMesh* mesh) {
  const PointCloud pred = upsampler(input);
  metrics::MetricReport report = metrics::evaluate_cloud(pred.points, dense_truth, mesh);
  if (!input.points.empty() && pred.size() % input.size() == 0) report.factor = pred.size() / input.size();
  return report;
}

}  // namespace geoup::train
