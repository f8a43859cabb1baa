#include "geoup/model.hpp"

#include "geoup/analytic_upsampler.hpp"
#include "geoup/error.hpp"
#include "geoup/losses.hpp"
#include "geoup/parallel.hpp"

#include <Eigen/LU>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numbers>
#include <numeric>
#include <sstream>

namespace geoup::model {

namespace {

constexpr char kMagic[] = "PUGEO1";
constexpr std::size_t kMagicSize = 6;
constexpr int kFormatVersion = 1;

template <class T>
Tensor<T> identity9(std::size_t rows) {
  std::vector<T> v(rows * 9, T(0));
  for (std::size_t i = 0; i < rows; ++i) {
    v[i * 9 + 0] = T(1);
    v[i * 9 + 4] = T(1);
    v[i * 9 + 8] = T(1);
  }
  return rows == 1 ? Tensor<T>::constant({9}, std::move(v)) : Tensor<T>::constant({rows, 9}, std::move(v));
}

std::vector<int> repeat_rows(std::size_t n, std::size_t times) {
  std::vector<int> idx(n * times);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t r = 0; r < times; ++r) idx[i * times + r] = static_cast<int>(i);
  return idx;
}

template <class T>
Tensor<T> cols(const Tensor<T>& a, std::initializer_list<int> c) {
  const std::vector<int> v(c);
  return ad::select_cols(a, std::span<const int>(v));
}

template <class T>
Tensor<T> col_range(const Tensor<T>& a, int begin, int end) {
  std::vector<int> v(static_cast<std::size_t>(end - begin));
  std::iota(v.begin(), v.end(), begin);
  return ad::select_cols(a, std::span<const int>(v));
}

template <class T>
Tensor<T> gather(const Tensor<T>& a, const std::vector<int>& idx) {
  return ad::gather_rows(a, std::span<const int>(idx));
}

// The same fixed jittered grid for every point, radius tied to the mean
// spacing of N points on a unit disk.
template <class T>
Tensor<T> fixed_grid(const ModelConfig& config, std::size_t rows) {
  Pcg32 rng(mix_seed(config.seed, 0x6e1d));
  const double spacing = std::sqrt(std::numbers::pi / static_cast<double>(config.patch_size));
  const auto samples = analytic::param_samples(
      config.factor, {analytic::PatternKind::jittered_grid, 0.7}, spacing, rng);
  std::vector<T> v(rows * config.factor * 2);
  for (std::size_t i = 0; i < rows; ++i) {
    for (std::size_t r = 0; r < config.factor; ++r) {
      v[(i * config.factor + r) * 2 + 0] = static_cast<T>(samples[r].u);
      v[(i * config.factor + r) * 2 + 1] = static_cast<T>(samples[r].v);
    }
  }
  return Tensor<T>::constant({rows * config.factor, 2}, std::move(v));
}

}  // namespace

// ---------------------------------------------------------------------------
// Config

std::size_t ModelConfig::total_features() const {
  return std::accumulate(features.begin(), features.end(), std::size_t{0});
}

void ModelConfig::validate() const {
  if (factor == 0) throw ArgumentError("model: factor must be >= 1");
  if (patch_size < 2) throw ArgumentError("model: patch size must be >= 2");
  if (neighbors == 0 || neighbors >= patch_size) {
    throw ArgumentError("model: need 1 <= k < N, got k=" + std::to_string(neighbors) +
                        " N=" + std::to_string(patch_size));
  }
  if (features.empty()) throw ArgumentError("model: need at least one feature level");
  for (auto f : features) {
    if (f == 0) throw ArgumentError("model: feature widths must be positive");
  }
  if (recalibration_hidden == 0 || expansion_hidden == 0 || transform_hidden == 0 || refine_hidden == 0) {
    throw ArgumentError("model: hidden widths must be positive");
  }
}

nlohmann::ordered_json ModelConfig::to_json() const {
  nlohmann::ordered_json j;
  j["factor"] = factor;
  j["patch_size"] = patch_size;
  j["neighbors"] = neighbors;
  j["features"] = features;
  j["recalibration_hidden"] = recalibration_hidden;
  j["expansion_hidden"] = expansion_hidden;
  j["transform_hidden"] = transform_hidden;
  j["refine_hidden"] = refine_hidden;
  j["ablation"] = {{"recalibration", recalibration},
                   {"learned_sampling", learned_sampling},
                   {"linear_transform", linear_transform},
                   {"coarse_to_fine", coarse_to_fine},
                   {"predict_normals", predict_normals}};
  j["dynamic_graph"] = dynamic_graph;
  j["seed"] = seed;
  return j;
}

ModelConfig ModelConfig::from_json(const nlohmann::json& j) {
  ModelConfig c;
  c.factor = j.at("factor").get<std::size_t>();
  c.patch_size = j.at("patch_size").get<std::size_t>();
  c.neighbors = j.at("neighbors").get<std::size_t>();
  c.features = j.at("features").get<std::vector<std::size_t>>();
  c.recalibration_hidden = j.at("recalibration_hidden").get<std::size_t>();
  c.expansion_hidden = j.at("expansion_hidden").get<std::size_t>();
  c.transform_hidden = j.at("transform_hidden").get<std::size_t>();
  c.refine_hidden = j.at("refine_hidden").get<std::size_t>();
  const auto& a = j.at("ablation");
  c.recalibration = a.at("recalibration").get<bool>();
  c.learned_sampling = a.at("learned_sampling").get<bool>();
  c.linear_transform = a.at("linear_transform").get<bool>();
  c.coarse_to_fine = a.at("coarse_to_fine").get<bool>();
  c.predict_normals = a.at("predict_normals").get<bool>();
  c.dynamic_graph = j.at("dynamic_graph").get<bool>();
  c.seed = j.at("seed").get<std::uint64_t>();
  c.validate();
  return c;
}

// ---------------------------------------------------------------------------
// Parameters

ModelParams<float> init_params(const ModelConfig& config) {
  config.validate();
  using nn::Init;
  using nn::make_mlp;
  Pcg32 rng(mix_seed(config.seed, 0x1417));
  const std::size_t F = config.total_features();
  const std::size_t R = config.factor;
  ModelParams<float> p;
  p.stn_point = make_mlp({{3, 16, 32}}, rng);
  p.stn_head = make_mlp({{32, 16, 9}}, rng, Init::zero_last);
  std::size_t in = 3;
  for (auto f : config.features) {
    p.edge.push_back(make_mlp({{2 * in, f, f}}, rng));
    in = f;
  }
  if (config.recalibration) p.recal = make_mlp({{F, config.recalibration_hidden, config.levels()}}, rng);
  if (config.learned_sampling) p.uv = make_mlp({{F, config.expansion_hidden, 2 * R}}, rng);
  if (config.linear_transform) {
    p.transform = make_mlp({{F, config.transform_hidden, 9}}, rng, Init::zero_last);
  } else {
    p.direct = make_mlp({{F, config.transform_hidden, 3 * R + 3}}, rng);
  }
  if (config.coarse_to_fine) {
    p.offset = make_mlp({{F + 3, config.refine_hidden, 1}}, rng, Init::zero_last);
    if (config.predict_normals) p.normal = make_mlp({{F + 3, config.refine_hidden, 3}}, rng, Init::zero_last);
  } else {
    p.one_shot = make_mlp({{F + 2, config.refine_hidden, config.predict_normals ? 6u : 3u}}, rng);
  }
  return p;
}

template <class T>
std::vector<std::pair<std::string, Tensor<T>*>> named_parameters(ModelParams<T>& params) {
  std::vector<std::pair<std::string, Tensor<T>*>> out;
  nn::collect_parameters(params.stn_point, "stn.point", out);
  nn::collect_parameters(params.stn_head, "stn.head", out);
  for (std::size_t l = 0; l < params.edge.size(); ++l) {
    nn::collect_parameters(params.edge[l], "edge" + std::to_string(l + 1), out);
  }
  nn::collect_parameters(params.recal, "recal", out);
  nn::collect_parameters(params.uv, "f1", out);
  nn::collect_parameters(params.transform, "f2", out);
  nn::collect_parameters(params.offset, "f3", out);
  nn::collect_parameters(params.normal, "f4", out);
  nn::collect_parameters(params.direct, "direct", out);
  nn::collect_parameters(params.one_shot, "one_shot", out);
  return out;
}

template <class To, class From>
ModelParams<To> cast_params(const ModelParams<From>& p) {
  ModelParams<To> out;
  out.stn_point = nn::cast_mlp<To>(p.stn_point);
  out.stn_head = nn::cast_mlp<To>(p.stn_head);
  for (const auto& e : p.edge) out.edge.push_back(nn::cast_mlp<To>(e));
  out.recal = nn::cast_mlp<To>(p.recal);
  out.uv = nn::cast_mlp<To>(p.uv);
  out.transform = nn::cast_mlp<To>(p.transform);
  out.offset = nn::cast_mlp<To>(p.offset);
  out.normal = nn::cast_mlp<To>(p.normal);
  out.direct = nn::cast_mlp<To>(p.direct);
  out.one_shot = nn::cast_mlp<To>(p.one_shot);
  return out;
}

// ---------------------------------------------------------------------------
// Graph

std::vector<int> canonical_rank(std::span<const Vec3> points) {
  std::vector<int> order(points.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    const Vec3& p = points[a];
    const Vec3& q = points[b];
    if (p.x() != q.x()) return p.x() < q.x();
    if (p.y() != q.y()) return p.y() < q.y();
    if (p.z() != q.z()) return p.z() < q.z();
    return a < b;
  });
  std::vector<int> rank(points.size());
  for (std::size_t r = 0; r < order.size(); ++r) rank[order[r]] = static_cast<int>(r);
  return rank;
}

template <class T>
std::vector<int> feature_knn(const Tensor<T>& features, std::size_t k, std::span<const int> rank) {
  if (features.rank() != 2) throw ShapeError("feature_knn: expected [n,f], got " + ad::shape_string(features.shape()));
  const std::size_t n = features.dim(0);
  const std::size_t f = features.dim(1);
  if (k >= n) {
    throw ArgumentError("feature_knn: need k < N, got k=" + std::to_string(k) + " N=" + std::to_string(n));
  }
  if (rank.size() != n) throw ArgumentError("feature_knn: rank size mismatch");
  const T* v = features.values().data();
  std::vector<int> out(n * k);
  parallel_for(n, [&](std::size_t i) {
    std::vector<std::pair<T, int>> cand;
    cand.reserve(n - 1);
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      T d = T(0);
      for (std::size_t c = 0; c < f; ++c) {
        const T diff = v[j * f + c] - v[i * f + c];
        d += diff * diff;
      }
      cand.emplace_back(d, static_cast<int>(j));
    }
    std::partial_sort(cand.begin(), cand.begin() + static_cast<std::ptrdiff_t>(k), cand.end(),
                      [&](const auto& a, const auto& b) {
                        if (a.first != b.first) return a.first < b.first;
                        return rank[a.second] < rank[b.second];
                      });
    for (std::size_t m = 0; m < k; ++m) out[i * k + m] = cand[m].second;
  });
  return out;
}

// ---------------------------------------------------------------------------
// Stages

template <class T>
StnOutput<T> stn_forward(const ModelParams<T>& params, const Tensor<T>& points) {
  if (points.rank() != 2 || points.dim(1) != 3 || points.dim(0) == 0) {
    throw ShapeError("stn_forward: expected [N,3], got " + ad::shape_string(points.shape()));
  }
  const Tensor<T> h = nn::mlp_forward(params.stn_point, points);
  const Tensor<T> pooled = ad::reshape(ad::reduce_max(h, 0), {1, h.dim(1)});
  const Tensor<T> residual = nn::mlp_forward(params.stn_head, pooled);
  const Tensor<T> A = ad::reshape(ad::add_bias(residual, identity9<T>(1)), {3, 3});
  return {ad::matmul(points, ad::transpose(A)), A};
}

template <class T>
std::vector<Tensor<T>> extract_features(const ModelParams<T>& params, const ModelConfig& config,
                                        const Tensor<T>& points, std::span<const int> rank) {
  const std::size_t n = points.dim(0);
  const std::size_t k = config.neighbors;
  if (params.edge.size() != config.levels()) throw ArgumentError("extract_features: level count mismatch");
  const std::vector<int> centers = repeat_rows(n, k);
  const std::vector<int> coordinate_graph = feature_knn(points, k, rank);
  std::vector<Tensor<T>> levels;
  Tensor<T> input = points;
  for (std::size_t l = 0; l < config.levels(); ++l) {
    const std::vector<int> graph =
        (l == 0 || !config.dynamic_graph) ? coordinate_graph : feature_knn(input, k, rank);
    const Tensor<T> fi = gather(input, centers);
    const Tensor<T> fj = gather(input, graph);
    const Tensor<T> edge = ad::concat<T>({fi, ad::sub(fj, fi)}, 1);
    const Tensor<T> h = nn::mlp_forward(params.edge[l], edge);
    const Tensor<T> pooled = ad::reduce_max(ad::reshape(h, {n, k, h.dim(1)}), 1);
    levels.push_back(pooled);
    input = pooled;
  }
  return levels;
}

template <class T>
Tensor<T> recalibrate(const ModelParams<T>& params, const ModelConfig& config,
                      const std::vector<Tensor<T>>& levels, Tensor<T>* weights) {
  const Tensor<T> joined = ad::concat(levels, 1);
  if (!config.recalibration) return joined;
  const Tensor<T> w = ad::softmax(nn::mlp_forward(params.recal, joined), 1);
  if (weights != nullptr) *weights = w;
  std::vector<Tensor<T>> blocks;
  for (std::size_t l = 0; l < levels.size(); ++l) {
    blocks.push_back(ad::scale_rows(levels[l], cols(w, {static_cast<int>(l)})));
  }
  return ad::concat(blocks, 1);
}

template <class T>
Expansion<T> expand(const ModelParams<T>& params, const ModelConfig& config, const Tensor<T>& c,
                    const Tensor<T>& points) {
  const std::size_t n = points.dim(0);
  const std::size_t R = config.factor;
  const std::vector<int> rep = repeat_rows(n, R);
  const Tensor<T> xrep = gather(points, rep);
  Expansion<T> e;
  e.uv = config.learned_sampling ? ad::reshape(nn::mlp_forward(params.uv, c), {n * R, 2})
                                 : fixed_grid<T>(config, n);
  if (config.linear_transform) {
    e.transform = ad::add_bias(nn::mlp_forward(params.transform, c), identity9<T>(1));
    const Tensor<T> trep = gather(e.transform, rep);
    const Tensor<T> u = cols(e.uv, {0});
    const Tensor<T> v = cols(e.uv, {1});
    const Tensor<T> u3 = ad::concat<T>({u, u, u}, 1);
    const Tensor<T> v3 = ad::concat<T>({v, v, v}, 1);
    e.xhat = ad::add(ad::add(xrep, ad::mul(cols(trep, {0, 3, 6}), u3)), ad::mul(cols(trep, {1, 4, 7}), v3));
    e.coarse_normals = ad::normalize_rows(cols(e.transform, {2, 5, 8}));
  } else {
    const Tensor<T> out = nn::mlp_forward(params.direct, c);
    const int r3 = static_cast<int>(3 * R);
    e.xhat = ad::add(xrep, ad::reshape(col_range(out, 0, r3), {n * R, 3}));
    const Tensor<T> up = Tensor<T>::constant({3}, {T(0), T(0), T(1)});
    e.coarse_normals = ad::normalize_rows(ad::add_bias(col_range(out, r3, r3 + 3), up));
    e.transform = identity9<T>(n);
  }
  return e;
}

template <class T>
Refinement<T> refine(const ModelParams<T>& params, const ModelConfig& config, const Expansion<T>& e,
                     const Tensor<T>& c, const Tensor<T>& points) {
  const std::size_t n = points.dim(0);
  const std::size_t R = config.factor;
  const std::vector<int> rep = repeat_rows(n, R);
  const Tensor<T> crep = gather(c, rep);
  const Tensor<T> nrep = gather(e.coarse_normals, rep);
  Refinement<T> r;
  if (config.coarse_to_fine) {
    const Tensor<T> in = ad::concat<T>({e.xhat, crep}, 1);
    r.deltas = nn::mlp_forward(params.offset, in);
    const Tensor<T> t3 = cols(gather(e.transform, rep), {2, 5, 8});
    r.points = ad::add(e.xhat, ad::mul(t3, ad::concat<T>({r.deltas, r.deltas, r.deltas}, 1)));
    r.normals = config.predict_normals
                    ? ad::normalize_rows(ad::add(nn::mlp_forward(params.normal, in), nrep))
                    : nrep;
    return r;
  }
  const Tensor<T> out = nn::mlp_forward(params.one_shot, ad::concat<T>({crep, e.uv}, 1));
  r.points = ad::add(gather(points, rep), cols(out, {0, 1, 2}));
  r.normals = config.predict_normals ? ad::normalize_rows(ad::add(cols(out, {3, 4, 5}), nrep)) : nrep;
  r.deltas = Tensor<T>::zeros({n * R, 1});
  return r;
}

template <class T>
ModelOutput<T> forward(const ModelParams<T>& params, const ModelConfig& config, std::span<const Vec3> patch) {
  if (patch.size() != config.patch_size) {
    throw ArgumentError("model forward: patch has " + std::to_string(patch.size()) + " points, model expects " +
                        std::to_string(config.patch_size));
  }
  const Tensor<T> x = losses::from_points<T>(patch);
  const std::vector<int> rank = canonical_rank(patch);
  const StnOutput<T> stn = stn_forward(params, x);
  const auto levels = extract_features(params, config, stn.aligned, rank);
  ModelOutput<T> out;
  const Tensor<T> c = recalibrate(params, config, levels, &out.gate);
  const Expansion<T> e = expand(params, config, c, stn.aligned);
  const Refinement<T> r = refine(params, config, e, c, stn.aligned);

  // Back to input coordinates: aligned = x A^T, normals transform by A^T.
  out.points = ad::matmul(r.points, ad::transpose(ad::inverse3(stn.A)));
  out.normals = ad::normalize_rows(ad::matmul(r.normals, stn.A));
  out.coarse_normals = ad::normalize_rows(ad::matmul(e.coarse_normals, stn.A));
  out.deltas = r.deltas;
  out.uv = e.uv;
  out.transform = e.transform;
  out.xhat = e.xhat;
  out.alignment = stn.A;
  return out;
}

template <class T>
UpsampleResult to_upsample_result(const ModelOutput<T>& out, std::size_t factor) {
  UpsampleResult res;
  res.factor = factor;
  res.points = losses::to_points(out.points);
  res.normals = losses::to_points(out.normals);
  res.coarse_normals = losses::to_points(out.coarse_normals);
  const auto d = out.deltas.values();
  res.deltas.assign(d.begin(), d.end());
  res.parent.resize(res.points.size());
  for (std::size_t s = 0; s < res.parent.size(); ++s) res.parent[s] = static_cast<int>(s / factor);
  return res;
}

template <class T>
std::vector<double> transform_determinants(const Tensor<T>& transform) {
  const auto v = transform.values();
  std::vector<double> det(v.size() / 9);
  for (std::size_t i = 0; i < det.size(); ++i) {
    Mat3 m;
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 3; ++c) m(r, c) = static_cast<double>(v[i * 9 + r * 3 + c]);
    det[i] = m.determinant();
  }
  return det;
}

// ---------------------------------------------------------------------------
// Checkpoint

static_assert(std::endian::native == std::endian::little, "checkpoint IO assumes a little-endian host");

std::string serialize_model(const ModelParams<float>& params, const ModelConfig& config) {
  ModelParams<float> view = params;
  const auto named = named_parameters(view);
  nlohmann::ordered_json header;
  header["version"] = kFormatVersion;
  header["config"] = config.to_json();
  header["tensors"] = nlohmann::ordered_json::array();
  std::size_t floats = 0;
  for (const auto& [name, t] : named) {
    header["tensors"].push_back({{"name", name}, {"shape", t->shape()}});
    floats += t->size();
  }
  const std::string text = header.dump();
  std::string out(kMagic, kMagicSize);
  const auto len = static_cast<std::uint32_t>(text.size());
  out.append(reinterpret_cast<const char*>(&len), sizeof len);
  out += text;
  out.reserve(out.size() + floats * sizeof(float));
  for (const auto& [name, t] : named) {
    const auto v = t->values();
    out.append(reinterpret_cast<const char*>(v.data()), v.size() * sizeof(float));
  }
  return out;
}

void save_model(const ModelParams<float>& params, const ModelConfig& config, const std::filesystem::path& path) {
  const std::string bytes = serialize_model(params, config);
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot open '" + path.string() + "' for writing");
  f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw IoError("failed writing '" + path.string() + "'");
}

Checkpoint deserialize_model(const std::string& bytes) {
  const std::string_view magic(kMagic, kMagicSize);
  if (bytes.size() < kMagicSize) {
    if (magic.starts_with(bytes)) throw CorruptionError("checkpoint truncated inside the magic");
    throw FormatError("not a checkpoint: bad magic");
  }
  if (std::string_view(bytes).substr(0, kMagicSize) != magic) throw FormatError("not a checkpoint: bad magic");
  std::uint32_t len = 0;
  if (bytes.size() < kMagicSize + sizeof len) throw CorruptionError("checkpoint truncated before header length");
  std::memcpy(&len, bytes.data() + kMagicSize, sizeof len);
  const std::size_t data_begin = kMagicSize + sizeof len + len;
  if (bytes.size() < data_begin) throw CorruptionError("checkpoint truncated inside the header");
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(bytes.begin() + kMagicSize + sizeof len, bytes.begin() + data_begin);
  } catch (const nlohmann::json::exception& ex) {
    throw CorruptionError(std::string("checkpoint header is not valid JSON: ") + ex.what());
  }
  if (!header.contains("version") || header["version"] != kFormatVersion) {
    throw FormatError("unsupported checkpoint version " + (header.contains("version") ? header["version"].dump() : "?"));
  }
  Checkpoint ck;
  try {
    ck.config = ModelConfig::from_json(header.at("config"));
  } catch (const nlohmann::json::exception& ex) {
    throw CorruptionError(std::string("checkpoint config: ") + ex.what());
  }
  ck.params = init_params(ck.config);
  auto named = named_parameters(ck.params);
  const auto& listed = header.at("tensors");
  if (listed.size() != named.size()) {
    throw CorruptionError("checkpoint lists " + std::to_string(listed.size()) + " tensors, config needs " +
                          std::to_string(named.size()));
  }
  std::size_t offset = data_begin;
  for (std::size_t i = 0; i < named.size(); ++i) {
    const auto& [name, t] = named[i];
    const auto shape = listed[i].at("shape").get<ad::Shape>();
    if (listed[i].at("name").get<std::string>() != name || shape != t->shape()) {
      throw CorruptionError("checkpoint tensor " + listed[i].dump() + " does not match expected " + name + " " +
                            ad::shape_string(t->shape()));
    }
    const std::size_t nbytes = t->size() * sizeof(float);
    if (bytes.size() < offset + nbytes) throw CorruptionError("checkpoint truncated in tensor " + name);
    auto dst = t->mutable_values();
    std::memcpy(dst.data(), bytes.data() + offset, nbytes);
    offset += nbytes;
  }
  if (offset != bytes.size()) throw CorruptionError("checkpoint has trailing bytes");
  return ck;
}

Checkpoint load_model(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open checkpoint '" + path.string() + "'");
  std::ostringstream ss;
  ss << f.rdbuf();
  return deserialize_model(ss.str());
}

#define GEOUP_MODEL_INSTANTIATE(T)                                                                               \
  template std::vector<std::pair<std::string, Tensor<T>*>> named_parameters<T>(ModelParams<T>&);                \
  template std::vector<int> feature_knn<T>(const Tensor<T>&, std::size_t, std::span<const int>);                \
  template StnOutput<T> stn_forward<T>(const ModelParams<T>&, const Tensor<T>&);                                \
  template std::vector<Tensor<T>> extract_features<T>(const ModelParams<T>&, const ModelConfig&,                \
                                                      const Tensor<T>&, std::span<const int>);                  \
  template Tensor<T> recalibrate<T>(const ModelParams<T>&, const ModelConfig&, const std::vector<Tensor<T>>&,   \
                                    Tensor<T>*);                                                                \
  template Expansion<T> expand<T>(const ModelParams<T>&, const ModelConfig&, const Tensor<T>&, const Tensor<T>&); \
  template Refinement<T> refine<T>(const ModelParams<T>&, const ModelConfig&, const Expansion<T>&,             \
                                   const Tensor<T>&, const Tensor<T>&);                                         \
  template ModelOutput<T> forward<T>(const ModelParams<T>&, const ModelConfig&, std::span<const Vec3>);         \
  template UpsampleResult to_upsample_result<T>(const ModelOutput<T>&, std::size_t);                            \
  template std::vector<double> transform_determinants<T>(const Tensor<T>&);

GEOUP_MODEL_INSTANTIATE(float)
GEOUP_MODEL_INSTANTIATE(double)

template ModelParams<double> cast_params<double, float>(const ModelParams<float>&);
template ModelParams<float> cast_params<float, double>(const ModelParams<double>&);
template ModelParams<float> cast_params<float, float>(const ModelParams<float>&);

}  // namespace geoup::model
