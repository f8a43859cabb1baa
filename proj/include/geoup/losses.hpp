#pragma once

#include "geoup/autodiff.hpp"
#include "geoup/geometry.hpp"
#include "geoup/metrics.hpp"

#include <span>

namespace geoup::losses {

using ad::Tensor;

/// Differentiable training losses. Nearest-neighbor correspondences are
/// found on the current values and held fixed in the backward pass.
struct LossOptions {
  metrics::LossWeights weights{};
  bool mean_normal_loss = false;
  bool symmetric_chamfer = false;
  /// Added under each point distance square root so coincident points keep a
  /// finite gradient.
  double distance_eps = 1e-12;
};

/// pred [n,3] against fixed points; the distance sums are divided by |truth|
/// (or use per-set means with symmetric_chamfer).
template <class T>
Tensor<T> chamfer_loss(const Tensor<T>& pred, std::span<const Vec3> truth, const LossOptions& options = {});

/// Index-aligned unoriented loss between pred [n,3] and truth.
template <class T>
Tensor<T> coarse_normal_loss(const Tensor<T>& pred_normals, std::span<const Vec3> truth,
                             const LossOptions& options = {});

/// Each predicted point takes the normal of its nearest ground-truth point.
template <class T>
Tensor<T> refined_normal_loss(const Tensor<T>& pred_points, const Tensor<T>& pred_normals,
                              const PointCloud& truth, const LossOptions& options = {});

template <class T>
struct LossTerms {
  Tensor<T> total;
  Tensor<T> cd;
  Tensor<T> coarse;
  Tensor<T> refined;
};

template <class T>
LossTerms<T> joint_loss(const Tensor<T>& cd, const Tensor<T>& coarse, const Tensor<T>& refined,
                        const metrics::LossWeights& w);

/// Rows of a [n,3] tensor as double vectors.
template <class T>
std::vector<Vec3> to_points(const Tensor<T>& t);

template <class T>
Tensor<T> from_points(std::span<const Vec3> points);

}  // namespace geoup::losses
