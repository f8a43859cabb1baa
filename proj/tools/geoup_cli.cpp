// geoup: dataset building, upsampling, training, evaluation and frame inspection.

#include "geoup/analytic_upsampler.hpp"
#include "geoup/error.hpp"
#include "geoup/io.hpp"
#include "geoup/local_geometry.hpp"
#include "geoup/metrics.hpp"
#include "geoup/model.hpp"
#include "geoup/parallel.hpp"
#include "geoup/trainer.hpp"

#include "CLI11.hpp"
#include "json.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using namespace geoup;

namespace {

struct Globals {
  std::uint64_t seed = 42;
  std::size_t threads = 0;
};

struct DatasetArgs {
  std::string mesh_dir;
  std::string out;
  train::DatasetOptions options;
};

struct UpsampleArgs {
  std::string input;
  std::string output;
  std::string method = "analytic";
  std::string model;
  std::optional<std::size_t> factor;
  std::size_t k = local::kDefaultNeighbors;
  std::string pattern = "fibonacci";
  bool no_displace = false;
  double coverage = 3.0;
};

struct TrainArgs {
  std::string data;
  std::string out;
  std::optional<std::size_t> factor;
  train::TrainConfig config;
  model::ModelConfig model;
  std::string features = "32,64,128";
  bool no_recalibration = false;
  bool no_learned_sampling = false;
  bool no_linear_transform = false;
  bool no_coarse_to_fine = false;
  bool no_normals = false;
  bool static_graph = false;
  bool no_augment = false;
};

struct EvalArgs {
  std::string pred;
  std::string gt_dense;
  std::string gt_mesh;
  std::string recon_mesh;
  std::size_t samples = 200000;
};

struct InspectArgs {
  std::string input;
  std::string method = "analytic";
  std::string model;
  std::size_t k = local::kDefaultNeighbors;
  std::size_t factor = 4;
  std::string pattern = "fibonacci";
  double coverage = 3.0;
};

std::vector<std::size_t> parse_widths(const std::string& text) {
  std::vector<std::size_t> out;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t comma = std::min(text.find(',', pos), text.size());
    const std::string item = text.substr(pos, comma - pos);
    try {
      std::size_t used = 0;
      const long long v = std::stoll(item, &used);
      if (used != item.size() || v <= 0) throw std::invalid_argument(item);
      out.push_back(static_cast<std::size_t>(v));
    } catch (const std::exception&) {
      throw ArgumentError("bad width list '" + text + "'");
    }
    pos = comma + 1;
  }
  return out;
}

void require_file(const std::string& path, const char* what) {
  if (path.empty()) throw ArgumentError(std::string("missing ") + what);
  if (!fs::is_regular_file(path)) throw IoError(std::string(what) + " '" + path + "' not found");
}

void validate_method(const std::string& method, const std::string& model_path) {
  if (method == "model") {
    if (model_path.empty()) throw ArgumentError("--method model requires --model");
    require_file(model_path, "model file");
  } else if (method == "analytic") {
    if (!model_path.empty()) throw ArgumentError("--model is only valid with --method model");
  } else {
    throw ArgumentError("unknown method '" + method + "' (expected analytic or model)");
  }
}

void write_stdout(const std::string& text) {
  std::fwrite(text.data(), 1, text.size(), stdout);
  std::fflush(stdout);
}

fs::path epoch_checkpoint_path(const fs::path& out, std::size_t epoch) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "_epoch%04zu", epoch);
  return out.parent_path() / (out.stem().string() + buf + out.extension().string());
}

int run_dataset(const DatasetArgs& a, const Globals& g) {
  if (!fs::is_directory(a.mesh_dir)) throw IoError("mesh directory '" + a.mesh_dir + "' not found");
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(a.mesh_dir)) {
    const std::string ext = entry.path().extension().string();
    if (entry.is_regular_file() && (ext == ".obj" || ext == ".ply")) files.push_back(entry.path());
  }
  if (files.empty()) throw ArgumentError("no .obj or .ply meshes in '" + a.mesh_dir + "'");
  std::sort(files.begin(), files.end());
  std::vector<TriangleMesh> meshes;
  std::vector<std::string> names;
  for (const auto& f : files) {
    meshes.push_back(io::read_mesh(f));
    names.push_back(f.filename().string());
  }
  train::DatasetOptions options = a.options;
  options.seed = g.seed;
  const auto examples = train::build_dataset(meshes, options);
  train::write_dataset(a.out, examples, names, options);
  std::cerr << "wrote " << examples.size() << " patches from " << meshes.size() << " meshes to " << a.out << "\n";
  return 0;
}

int run_upsample(const UpsampleArgs& a, const Globals& g) {
  validate_method(a.method, a.model);
  require_file(a.input, "input");
  if (a.output.empty()) throw ArgumentError("missing --output");
  const PointCloud input = io::read_xyz(a.input);
  PointCloud out;
  if (a.method == "model") {
    const model::Checkpoint ck = model::load_model(a.model);
    if (a.factor && *a.factor != ck.config.factor) {
      throw ArgumentError("--factor " + std::to_string(*a.factor) + " does not match the checkpoint factor " +
                          std::to_string(ck.config.factor));
    }
    out = train::upsample_with_model(ck.params, ck.config, input, a.coverage);
  } else {
    analytic::AnalyticOptions o;
    o.factor = a.factor.value_or(4);
    o.neighbors = a.k;
    o.pattern.kind = analytic::parse_pattern(a.pattern);
    o.displace = !a.no_displace;
    o.seed = g.seed;
    out = train::analytic_upsampler(o)(input);
  }
  io::write_xyz(out, a.output);
  std::cerr << "wrote " << out.size() << " points to " << a.output << "\n";
  return 0;
}

int run_train(TrainArgs a, const Globals& g) {
  if (a.out.empty()) throw ArgumentError("missing --out");
  if (a.data.empty()) throw ArgumentError("missing --data");
  const train::Dataset data = train::read_dataset(a.data);
  if (a.factor && *a.factor != data.options.factor) {
    throw ArgumentError("--factor " + std::to_string(*a.factor) + " does not match the dataset factor " +
                        std::to_string(data.options.factor));
  }
  model::ModelConfig& m = a.model;
  m.factor = data.options.factor;
  m.patch_size = data.options.patch_size;
  m.features = parse_widths(a.features);
  m.recalibration = !a.no_recalibration;
  m.learned_sampling = !a.no_learned_sampling;
  m.linear_transform = !a.no_linear_transform;
  m.coarse_to_fine = !a.no_coarse_to_fine;
  m.predict_normals = !a.no_normals;
  m.dynamic_graph = !a.static_graph;
  m.seed = g.seed;
  m.validate();
  a.config.seed = g.seed;
  a.config.augment = !a.no_augment;

  model::ModelParams<float> params = model::init_params(m);
  const fs::path out = a.out;
  if (out.has_parent_path()) fs::create_directories(out.parent_path());
  train::TrainCallbacks cb;
  cb.on_epoch = [](const train::LossRecord& r) { write_stdout(r.to_json("epoch").dump() + "\n"); };
  cb.on_checkpoint = [&](std::size_t epoch, const model::ModelParams<float>& p) {
    model::save_model(p, m, epoch_checkpoint_path(out, epoch));
  };
  train::train(a.config, data.examples, m, params, cb);
  model::save_model(params, m, out);
  std::cerr << "saved checkpoint " << out.string() << "\n";
  return 0;
}

int run_eval(const EvalArgs& a, const Globals& g) {
  require_file(a.pred, "--pred");
  require_file(a.gt_dense, "--gt-dense");
  require_file(a.gt_mesh, "--gt-mesh");
  if (!a.recon_mesh.empty()) require_file(a.recon_mesh, "--recon-mesh");
  const PointCloud pred = io::read_xyz(a.pred);
  const PointCloud dense = io::read_xyz(a.gt_dense);
  const TriangleMesh mesh = io::read_mesh(a.gt_mesh);
  metrics::MetricReport r = metrics::evaluate_cloud(pred.points, dense.points, &mesh);
  r.sources = {{"pred", a.pred}, {"gt_dense", a.gt_dense}, {"gt_mesh", a.gt_mesh}};
  if (!a.recon_mesh.empty()) {
    r.sources["recon_mesh"] = a.recon_mesh;
    r.reconstruction = metrics::surface_compare(io::read_mesh(a.recon_mesh), mesh, a.samples, g.seed);
  }
  write_stdout(r.to_json().dump() + "\n");
  return 0;
}

int run_inspect(const InspectArgs& a, const Globals& g) {
  validate_method(a.method, a.model);
  require_file(a.input, "input");
  const PointCloud input = io::read_xyz(a.input);
  local::FrameStats stats;
  if (a.method == "model") {
    const model::Checkpoint ck = model::load_model(a.model);
    train::ModelTrace trace;
    train::upsample_with_model(ck.params, ck.config, input, a.coverage, &trace);
    stats = local::frame_stats(trace.frames, trace.deltas);
  } else {
    analytic::AnalyticOptions o;
    o.factor = a.factor;
    o.neighbors = a.k;
    o.pattern.kind = analytic::parse_pattern(a.pattern);
    o.seed = g.seed;
    const auto res = analytic::upsample_analytic(input.points, o);
    stats = local::frame_stats(res.frames, res.result.deltas);
  }
  write_stdout(stats.to_tsv());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Point cloud upsampling with local geometry"};
  app.require_subcommand(1);
  Globals g;
  app.add_option("--seed", g.seed, "Random seed")->capture_default_str();
  app.add_option("--threads", g.threads, "Worker threads (0 = all cores)")->capture_default_str();

  DatasetArgs ds;
  auto* dataset = app.add_subcommand("dataset", "Dataset tools");
  dataset->require_subcommand(1);
  auto* build = dataset->add_subcommand("build", "Sample meshes into sparse/dense training patches");
  build->add_option("--mesh-dir", ds.mesh_dir, "Directory of .obj/.ply meshes")->required();
  build->add_option("--out", ds.out, "Output dataset directory")->required();
  build->add_option("--points", ds.options.points, "Sparse points per mesh (M)")->capture_default_str();
  build->add_option("--factor", ds.options.factor, "Upsampling factor (R)")->capture_default_str();
  build->add_option("--patch-size", ds.options.patch_size, "Points per patch (N)")->capture_default_str();
  build->add_option("--coverage", ds.options.coverage, "Patch coverage multiplier")->capture_default_str();
  build->add_option("--noise-sigma", ds.options.noise_sigma, "Gaussian noise on sparse inputs")
      ->capture_default_str();

  UpsampleArgs up;
  auto* upsample = app.add_subcommand("upsample", "Upsample a point cloud");
  upsample->add_option("--input", up.input, "Input .xyz")->required();
  upsample->add_option("--output", up.output, "Output .xyz (points and normals)")->required();
  upsample->add_option("--factor", up.factor, "Upsampling factor (default 4, or the checkpoint's)");
  upsample->add_option("--method", up.method, "analytic or model")->capture_default_str();
  upsample->add_option("--model", up.model, "Checkpoint for --method model");
  upsample->add_option("--k", up.k, "Neighbors for the analytic fit")->capture_default_str();
  upsample->add_option("--pattern", up.pattern, "fibonacci or grid")->capture_default_str();
  upsample->add_flag("--no-displace", up.no_displace, "Keep analytic samples on the tangent plane");
  upsample->add_option("--coverage", up.coverage, "Patch coverage for the model")->capture_default_str();

  TrainArgs tr;
  auto* trn = app.add_subcommand("train", "Train the model on a dataset");
  trn->add_option("--data", tr.data, "Dataset directory or manifest")->required();
  trn->add_option("--out", tr.out, "Checkpoint path")->required();
  trn->add_option("--factor", tr.factor, "Must match the dataset factor");
  trn->add_option("--epochs", tr.config.epochs, "Epochs")->capture_default_str();
  trn->add_option("--batch", tr.config.batch, "Mini-batch size")->capture_default_str();
  trn->add_option("--lr", tr.config.lr, "Adam learning rate")->capture_default_str();
  trn->add_option("--checkpoint-every", tr.config.checkpoint_every, "Checkpoint cadence in epochs (0 = final only)")
      ->capture_default_str();
  trn->add_option("--alpha", tr.config.loss.weights.alpha, "Chamfer weight")->capture_default_str();
  trn->add_option("--beta", tr.config.loss.weights.beta, "Coarse normal weight")->capture_default_str();
  trn->add_option("--gamma", tr.config.loss.weights.gamma, "Refined normal weight")->capture_default_str();
  trn->add_flag("--mean-normal-loss", tr.config.loss.mean_normal_loss, "Average the normal losses");
  trn->add_flag("--symmetric-chamfer", tr.config.loss.symmetric_chamfer, "Per-set mean Chamfer");
  trn->add_flag("--no-augment", tr.no_augment, "Disable rotation/scale/jitter augmentation");
  trn->add_option("--k", tr.model.neighbors, "Edge-feature neighbors")->capture_default_str();
  trn->add_option("--features", tr.features, "Per-level feature widths")->capture_default_str();
  trn->add_option("--recal-hidden", tr.model.recalibration_hidden)->capture_default_str();
  trn->add_option("--expansion-hidden", tr.model.expansion_hidden)->capture_default_str();
  trn->add_option("--transform-hidden", tr.model.transform_hidden)->capture_default_str();
  trn->add_option("--refine-hidden", tr.model.refine_hidden)->capture_default_str();
  trn->add_flag("--no-recalibration", tr.no_recalibration, "Concatenate level features directly");
  trn->add_flag("--no-learned-sampling", tr.no_learned_sampling, "Use a fixed 2D grid");
  trn->add_flag("--no-linear-transform", tr.no_linear_transform, "Regress coordinates and normals directly");
  trn->add_flag("--no-coarse-to-fine", tr.no_coarse_to_fine, "Skip the coarse prediction");
  trn->add_flag("--no-normals", tr.no_normals, "No normal prediction or supervision");
  trn->add_flag("--static-graph", tr.static_graph, "Coordinate-space neighbor graph at every level");

  EvalArgs ev;
  auto* eval = app.add_subcommand("eval", "Score a prediction against ground truth");
  eval->add_option("--pred", ev.pred, "Predicted .xyz")->required();
  eval->add_option("--gt-dense", ev.gt_dense, "Dense ground-truth .xyz")->required();
  eval->add_option("--gt-mesh", ev.gt_mesh, "Ground-truth mesh")->required();
  eval->add_option("--recon-mesh", ev.recon_mesh, "Reconstructed mesh for surface comparison");
  eval->add_option("--samples", ev.samples, "Samples per mesh for surface comparison")->capture_default_str();

  InspectArgs in;
  auto* inspect = app.add_subcommand("inspect", "Diagnostics");
  inspect->require_subcommand(1);
  auto* frames = inspect->add_subcommand("frames", "Frame angle and displacement histograms");
  frames->add_option("--input", in.input, "Input .xyz")->required();
  frames->add_option("--method", in.method, "analytic or model")->capture_default_str();
  frames->add_option("--model", in.model, "Checkpoint for --method model");
  frames->add_option("--k", in.k)->capture_default_str();
  frames->add_option("--factor", in.factor)->capture_default_str();
  frames->add_option("--pattern", in.pattern)->capture_default_str();
  frames->add_option("--coverage", in.coverage)->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    set_thread_count(g.threads);
    if (build->parsed()) return run_dataset(ds, g);
    if (upsample->parsed()) return run_upsample(up, g);
    if (trn->parsed()) return run_train(tr, g);
    if (eval->parsed()) return run_eval(ev, g);
    if (frames->parsed()) return run_inspect(in, g);
  } catch (const NumericalError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 2;
}
