#include "geoup/losses.hpp"

#include "geoup/error.hpp"

namespace geoup::losses {

template <class T>
std::vector<Vec3> to_points(const Tensor<T>& t) {
  if (t.rank() != 2 || t.dim(1) != 3) throw ShapeError("expected [n,3], got " + ad::shape_string(t.shape()));
  const auto v = t.values();
  std::vector<Vec3> out(t.dim(0));
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = Vec3(v[3 * i], v[3 * i + 1], v[3 * i + 2]);
  return out;
}

template <class T>
Tensor<T> from_points(std::span<const Vec3> points) {
  std::vector<T> v(points.size() * 3);
  for (std::size_t i = 0; i < points.size(); ++i)
    for (int a = 0; a < 3; ++a) v[3 * i + a] = static_cast<T>(points[i][a]);
  return Tensor<T>::constant({points.size(), 3}, std::move(v));
}

namespace {

template <class T>
Tensor<T> row_norms(const Tensor<T>& diff, T eps) {
  return ad::sqrt(ad::add_scalar(ad::reduce_sum(ad::square(diff), 1), eps));
}

template <class T>
Tensor<T> gather_fixed(std::span<const Vec3> points, const std::vector<int>& idx) {
  std::vector<Vec3> picked(idx.size());
  for (std::size_t i = 0; i < idx.size(); ++i) {
    picked[i] = points[idx[i]];
    ad::SelectionTrace::record(static_cast<std::uint64_t>(idx[i]));
  }
  return from_points<T>(picked);
}

// Per-row min(|n - m|^2, |n + m|^2).
template <class T>
Tensor<T> unoriented_rows(const Tensor<T>& n, const Tensor<T>& m) {
  const Tensor<T> minus = ad::reduce_sum(ad::square(ad::sub(n, m)), 1);
  const Tensor<T> plus = ad::reduce_sum(ad::square(ad::add(n, m)), 1);
  return ad::minimum(minus, plus);
}

}  // namespace

template <class T>
Tensor<T> chamfer_loss(const Tensor<T>& pred, std::span<const Vec3> truth, const LossOptions& options) {
  const std::vector<Vec3> p = to_points(pred);
  if (p.empty() || truth.empty()) throw ArgumentError("chamfer: point sets must be non-empty");
  const T eps = static_cast<T>(options.distance_eps);
  const auto phi = metrics::nearest_indices(p, truth);
  const auto psi = metrics::nearest_indices(truth, p);
  const Tensor<T> forward = ad::sum(row_norms(ad::sub(pred, gather_fixed<T>(truth, phi)), eps));
  const std::span<const int> psi_span(psi);
  const Tensor<T> backward = ad::sum(row_norms(ad::sub(ad::gather_rows(pred, psi_span), from_points<T>(truth)), eps));
  if (options.symmetric_chamfer) {
    return ad::add(ad::scale(forward, T(1) / static_cast<T>(p.size())),
                   ad::scale(backward, T(1) / static_cast<T>(truth.size())));
  }
  return ad::scale(ad::add(forward, backward), T(1) / static_cast<T>(truth.size()));
}

template <class T>
Tensor<T> coarse_normal_loss(const Tensor<T>& pred_normals, std::span<const Vec3> truth, const LossOptions& options) {
  if (pred_normals.rank() != 2 || pred_normals.dim(0) != truth.size()) {
    throw ArgumentError("coarse_normal_loss: " + ad::shape_string(pred_normals.shape()) + " predictions vs " +
                        std::to_string(truth.size()) + " ground-truth normals");
  }
  const Tensor<T> rows = unoriented_rows(pred_normals, from_points<T>(truth));
  return options.mean_normal_loss ? ad::mean(rows) : ad::sum(rows);
}

template <class T>
Tensor<T> refined_normal_loss(const Tensor<T>& pred_points, const Tensor<T>& pred_normals, const PointCloud& truth,
                              const LossOptions& options) {
  if (truth.points.empty()) throw ArgumentError("refined_normal_loss: empty ground truth");
  if (!truth.has_normals()) throw ArgumentError("refined_normal_loss: ground truth has no normals");
  if (pred_points.shape() != pred_normals.shape()) {
    throw ShapeError("refined_normal_loss: points " + ad::shape_string(pred_points.shape()) + " vs normals " +
                     ad::shape_string(pred_normals.shape()));
  }
  const auto phi = metrics::nearest_indices(to_points(pred_points), truth.points);
  const Tensor<T> rows = unoriented_rows(pred_normals, gather_fixed<T>(truth.normals, phi));
  return options.mean_normal_loss ? ad::mean(rows) : ad::sum(rows);
}

template <class T>
LossTerms<T> joint_loss(const Tensor<T>& cd, const Tensor<T>& coarse, const Tensor<T>& refined,
                        const metrics::LossWeights& w) {
  w.validate();
  Tensor<T> total = ad::scale(cd, static_cast<T>(w.alpha));
  total = ad::add(total, ad::scale(coarse, static_cast<T>(w.beta)));
  total = ad::add(total, ad::scale(refined, static_cast<T>(w.gamma)));
  return {total, cd, coarse, refined};
}

#define GEOUP_LOSS_INSTANTIATE(T)                                                                          \
  template std::vector<Vec3> to_points<T>(const Tensor<T>&);                                               \
  template Tensor<T> from_points<T>(std::span<const Vec3>);                                                \
  template Tensor<T> chamfer_loss<T>(const Tensor<T>&, std::span<const Vec3>, const LossOptions&);         \
  template Tensor<T> coarse_normal_loss<T>(const Tensor<T>&, std::span<const Vec3>, const LossOptions&);   \
  template Tensor<T> refined_normal_loss<T>(const Tensor<T>&, const Tensor<T>&, const PointCloud&,         \
                                            const LossOptions&);                                           \
  template LossTerms<T> joint_loss<T>(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&,                \
                                      const metrics::LossWeights&);

GEOUP_LOSS_INSTANTIATE(float)
GEOUP_LOSS_INSTANTIATE(double)

}  // namespace geoup::losses
