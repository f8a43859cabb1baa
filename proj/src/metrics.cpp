#include "geoup/metrics.hpp"

#include "geoup/error.hpp"
#include "geoup/kdtree.hpp"
#include "geoup/parallel.hpp"
#include "geoup/rng.hpp"
#include "geoup/sampling.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace geoup::metrics {

namespace {

void require_nonempty(std::span<const Vec3> x, std::span<const Vec3> y, const char* op) {
  if (x.empty() || y.empty()) throw ArgumentError(std::string(op) + ": point sets must be non-empty");
}

// Per-point distance to the nearest point of `to`.
std::vector<double> directed_distances(std::span<const Vec3> from, std::span<const Vec3> to) {
  const KdTree tree(to);
  std::vector<double> d(from.size());
  parallel_for(from.size(), [&](std::size_t i) { d[i] = std::sqrt(tree.nearest(from[i]).squared_distance); });
  return d;
}

double ordered_sum(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s;
}

}  // namespace

std::vector<int> nearest_indices(std::span<const Vec3> from, std::span<const Vec3> to) {
  if (to.empty()) throw ArgumentError("nearest_indices: target set is empty");
  const KdTree tree(to);
  std::vector<int> idx(from.size());
  parallel_for(from.size(), [&](std::size_t i) { idx[i] = tree.nearest(from[i]).index; });
  return idx;
}

double chamfer(std::span<const Vec3> x, std::span<const Vec3> y, ChamferNorm norm) {
  require_nonempty(x, y, "chamfer");
  const double sx = ordered_sum(directed_distances(x, y));
  const double sy = ordered_sum(directed_distances(y, x));
  if (norm == ChamferNorm::symmetric_mean) {
    return sx / static_cast<double>(x.size()) + sy / static_cast<double>(y.size());
  }
  return (sx + sy) / static_cast<double>(y.size());
}

double hausdorff(std::span<const Vec3> x, std::span<const Vec3> y) {
  require_nonempty(x, y, "hausdorff");
  const auto dx = directed_distances(x, y);
  const auto dy = directed_distances(y, x);
  return std::max(*std::max_element(dx.begin(), dx.end()), *std::max_element(dy.begin(), dy.end()));
}

double jsd(std::span<const Vec3> x, std::span<const Vec3> y, std::size_t grid) {
  require_nonempty(x, y, "jsd");
  if (grid == 0) throw ArgumentError("jsd: grid must be positive");
  Aabb box = bounding_box(x);
  for (const auto& p : y) box.expand(p);
  Vec3 ext = box.extent();
  for (int a = 0; a < 3; ++a) {
    const double pad = ext[a] > 0.0 ? 0.01 * ext[a] : 1e-9 * std::max(1.0, std::abs(box.lo[a]));
    box.lo[a] -= pad;
    box.hi[a] += pad;
  }
  ext = box.extent();
  const auto g = static_cast<long long>(grid);
  auto cell = [&](const Vec3& p) {
    long long id = 0;
    for (int a = 0; a < 3; ++a) {
      auto c = static_cast<long long>(std::floor((p[a] - box.lo[a]) / ext[a] * static_cast<double>(grid)));
      c = std::clamp<long long>(c, 0, g - 1);
      id = id * g + c;
    }
    return static_cast<std::size_t>(id);
  };
  std::vector<double> px(grid * grid * grid, 0.0);
  std::vector<double> py(px.size(), 0.0);
  for (const auto& p : x) px[cell(p)] += 1.0;
  for (const auto& p : y) py[cell(p)] += 1.0;
  const double nx = static_cast<double>(x.size());
  const double ny = static_cast<double>(y.size());
  double kl_p = 0.0;
  double kl_q = 0.0;
  for (std::size_t i = 0; i < px.size(); ++i) {
    const double p = px[i] / nx;
    const double q = py[i] / ny;
    const double m = 0.5 * (p + q);
    if (p > 0.0) kl_p += p * std::log(p / m);
    if (q > 0.0) kl_q += q * std::log(q / m);
  }
  return std::max(0.0, 0.5 * kl_p + 0.5 * kl_q);
}

Vec3 closest_point_on_triangle(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c) {
  const Vec3 ab = b - a;
  const Vec3 ac = c - a;
  const Vec3 ap = p - a;
  const double d1 = ab.dot(ap);
  const double d2 = ac.dot(ap);
  if (d1 <= 0.0 && d2 <= 0.0) return a;

  const Vec3 bp = p - b;
  const double d3 = ab.dot(bp);
  const double d4 = ac.dot(bp);
  if (d3 >= 0.0 && d4 <= d3) return b;

  const double vc = d1 * d4 - d3 * d2;
  if (vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0) return a + (d1 / (d1 - d3)) * ab;

  const Vec3 cp = p - c;
  const double d5 = ab.dot(cp);
  const double d6 = ac.dot(cp);
  if (d6 >= 0.0 && d5 <= d6) return c;

  const double vb = d5 * d2 - d1 * d6;
  if (vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0) return a + (d2 / (d2 - d6)) * ac;

  const double va = d3 * d6 - d5 * d4;
  if (va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0) {
    return b + ((d4 - d3) / ((d4 - d3) + (d5 - d6))) * (c - b);
  }
  const double denom = 1.0 / (va + vb + vc);
  return a + ab * (vb * denom) + ac * (vc * denom);
}

TriangleBvh::TriangleBvh(const TriangleMesh& mesh) : vertices_(mesh.vertices), triangles_(mesh.triangles) {
  if (triangles_.empty()) throw ArgumentError("p2f: mesh has no triangles");
  validate_mesh(mesh);
  std::vector<Vec3> centers(triangles_.size());
  for (std::size_t t = 0; t < triangles_.size(); ++t) {
    const auto& tri = triangles_[t];
    centers[t] = (vertices_[tri[0]] + vertices_[tri[1]] + vertices_[tri[2]]) / 3.0;
  }
  order_.resize(triangles_.size());
  std::iota(order_.begin(), order_.end(), 0);
  nodes_.reserve(2 * triangles_.size() / 4 + 1);
  build(0, static_cast<int>(order_.size()), centers);
}

int TriangleBvh::build(int begin, int end, std::vector<Vec3>& centers) {
  const int id = static_cast<int>(nodes_.size());
  nodes_.push_back({});
  Aabb box;
  Aabb cbox;
  for (int i = begin; i < end; ++i) {
    const auto& tri = triangles_[order_[i]];
    for (int v : tri) box.expand(vertices_[v]);
    cbox.expand(centers[order_[i]]);
  }
  nodes_[id].box = box;
  nodes_[id].begin = begin;
  nodes_[id].end = end;
  if (end - begin <= 4) return id;
  int axis = 0;
  cbox.extent().maxCoeff(&axis);
  const int mid = begin + (end - begin) / 2;
  std::nth_element(order_.begin() + begin, order_.begin() + mid, order_.begin() + end, [&](int a, int b) {
    if (centers[a][axis] != centers[b][axis]) return centers[a][axis] < centers[b][axis];
    return a < b;
  });
  const int left = build(begin, mid, centers);
  const int right = build(mid, end, centers);
  nodes_[id].left = left;
  nodes_[id].right = right;
  return id;
}

double TriangleBvh::triangle_d2(int t, const Vec3& p) const {
  const auto& tri = triangles_[t];
  return geoup::squared_distance(p, closest_point_on_triangle(p, vertices_[tri[0]], vertices_[tri[1]], vertices_[tri[2]]));
}

double TriangleBvh::squared_distance(const Vec3& p) const {
  double best = std::numeric_limits<double>::infinity();
  std::vector<int> stack{0};
  while (!stack.empty()) {
    const Node& node = nodes_[stack.back()];
    stack.pop_back();
    // Box bound is a true lower bound; the slack absorbs rounding so no
    // triangle that could tie the best is skipped.
    if (squared_distance_to_box(p, node.box) > best * (1.0 + 1e-9)) continue;
    if (node.left < 0) {
      for (int i = node.begin; i < node.end; ++i) best = std::min(best, triangle_d2(order_[i], p));
      continue;
    }
    const double dl = squared_distance_to_box(p, nodes_[node.left].box);
    const double dr = squared_distance_to_box(p, nodes_[node.right].box);
    if (dl <= dr) {
      stack.push_back(node.right);
      stack.push_back(node.left);
    } else {
      stack.push_back(node.left);
      stack.push_back(node.right);
    }
  }
  return best;
}

double TriangleBvh::distance(const Vec3& p) const { return std::sqrt(squared_distance(p)); }

P2fStats p2f(std::span<const Vec3> points, const TriangleMesh& mesh) {
  if (points.empty()) throw ArgumentError("p2f: point set is empty");
  const TriangleBvh bvh(mesh);
  std::vector<double> d(points.size());
  parallel_for(points.size(), [&](std::size_t i) { d[i] = bvh.distance(points[i]); });
  P2fStats s;
  const double n = static_cast<double>(d.size());
  s.mean = ordered_sum(d) / n;
  double var = 0.0;
  for (double v : d) var += (v - s.mean) * (v - s.mean);
  s.std = std::sqrt(var / n);
  return s;
}

double normal_loss_unoriented(const Vec3& n, const Vec3& m) {
  if (std::abs(n.norm() - 1.0) > 1e-5 || std::abs(m.norm() - 1.0) > 1e-5) {
    throw ArgumentError("normal_loss_unoriented: inputs must be unit vectors");
  }
  return std::min((n - m).squaredNorm(), (n + m).squaredNorm());
}

double coarse_normal_loss(std::span<const Vec3> predicted, std::span<const Vec3> truth, bool mean) {
  if (predicted.size() != truth.size()) {
    throw ArgumentError("coarse_normal_loss: " + std::to_string(predicted.size()) + " predictions vs " +
                        std::to_string(truth.size()) + " ground-truth normals");
  }
  double s = 0.0;
  for (std::size_t i = 0; i < predicted.size(); ++i) s += normal_loss_unoriented(predicted[i], truth[i]);
  return mean && !predicted.empty() ? s / static_cast<double>(predicted.size()) : s;
}

double refined_normal_loss(std::span<const Vec3> points, std::span<const Vec3> normals,
                           const PointCloud& truth, bool mean) {
  if (truth.points.empty()) throw ArgumentError("refined_normal_loss: empty ground truth");
  if (!truth.has_normals()) throw ArgumentError("refined_normal_loss: ground truth has no normals");
  if (points.size() != normals.size()) throw ArgumentError("refined_normal_loss: points/normals size mismatch");
  const auto match = nearest_indices(points, truth.points);
  double s = 0.0;
  for (std::size_t i = 0; i < points.size(); ++i) s += normal_loss_unoriented(normals[i], truth.normals[match[i]]);
  return mean && !points.empty() ? s / static_cast<double>(points.size()) : s;
}

void LossWeights::validate() const {
  if (!(alpha >= 0.0) || !(beta >= 0.0) || !(gamma >= 0.0)) {
    throw ArgumentError("loss weights must be non-negative");
  }
}

double total_loss(double cd, double coarse, double refined, const LossWeights& w) {
  return w.alpha * cd + w.beta * coarse + w.gamma * refined;
}

SurfaceComparison surface_compare(const TriangleMesh& a, const TriangleMesh& b, std::size_t n,
                                  std::uint64_t seed, bool same_stream) {
  const std::uint64_t seed_a = same_stream ? seed : mix_seed(seed, 0xa);
  const std::uint64_t seed_b = same_stream ? seed : mix_seed(seed, 0xb);
  const PointCloud sa = sampling::poisson_disk_sample(a, n, seed_a);
  const PointCloud sb = sampling::poisson_disk_sample(b, n, seed_b);
  return {chamfer(sa.points, sb.points), hausdorff(sa.points, sb.points), jsd(sa.points, sb.points)};
}

nlohmann::ordered_json MetricReport::to_json() const {
  nlohmann::ordered_json j;
  j["cd"] = cd;
  j["hd"] = hd;
  j["jsd"] = jsd;
  j["p2f_mean"] = p2f_mean;
  j["p2f_std"] = p2f_std;
  j["predicted_points"] = predicted_points;
  j["reference_points"] = reference_points;
  if (factor) j["factor"] = *factor;
  j["sources"] = sources;
  if (reconstruction) {
    j["cd#"] = reconstruction->cd;
    j["hd#"] = reconstruction->hd;
    j["jsd#"] = reconstruction->jsd;
  }
  return j;
}

MetricReport evaluate_cloud(std::span<const Vec3> pred, std::span<const Vec3> reference,
                            const TriangleMesh* mesh) {
  MetricReport r;
  r.cd = chamfer(pred, reference);
  r.hd = hausdorff(pred, reference);
  r.jsd = jsd(pred, reference);
  if (mesh != nullptr) {
    const P2fStats s = p2f(pred, *mesh);
    r.p2f_mean = s.mean;
    r.p2f_std = s.std;
  }
  r.predicted_points = pred.size();
  r.reference_points = reference.size();
  return r;
}

}  // namespace geoup::metrics
