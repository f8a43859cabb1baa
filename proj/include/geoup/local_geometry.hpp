#pragma once

#include "geoup/geometry.hpp"

#include <span>
#include <string>
#include <vector>

namespace geoup::local {

/// Per-point first-order frame T = [t1 t2 t3] anchored at origin. For frames
/// built by estimate_frame, t1 and t2 are orthonormal and t3 = t1 x t2.
/// Learned frames need not satisfy either property.
struct AugmentedJacobian {
  Vec3 origin = Vec3::Zero();
  Vec3 t1 = Vec3::UnitX();
  Vec3 t2 = Vec3::UnitY();
  Vec3 t3 = Vec3::UnitZ();

  Mat3 matrix() const {
    Mat3 m;
    m.col(0) = t1;
    m.col(1) = t2;
    m.col(2) = t3;
    return m;
  }
};

/// Second fundamental form in frame coordinates: w = (e u^2 + 2 f uv + g v^2) / 2,
/// with its eigen decomposition k1 >= k2 and unit principal directions
/// expressed in (t1, t2) coordinates.
struct FundamentalForms {
  double e = 0.0;
  double f = 0.0;
  double g = 0.0;
  double k1 = 0.0;
  double k2 = 0.0;
  Vec2 dir1 = Vec2::UnitX();
  Vec2 dir2 = Vec2::UnitY();
  bool degenerate = false;
};

/// Parametric coordinates in length units of the local frame.
struct ParamSample {
  double u = 0.0;
  double v = 0.0;
};

/// Default neighborhood size for frames and curvature fits.
inline constexpr std::size_t kDefaultNeighbors = 16;

/// PCA frame of a neighborhood. t3 is the least-variance direction, oriented
/// toward the side the neighbors bend to (t3 . (centroid - center) >= 0, with
/// +z as the fallback for flat neighborhoods); t1 follows the largest-variance
/// direction; the frame is right-handed with t3 = t1 x t2 recomputed exactly.
/// Throws ArgumentError for fewer than 6 points and GeometryError when the
/// neighborhood is collinear or coincident.
AugmentedJacobian estimate_frame(std::span<const Vec3> neighborhood, const Vec3& center);

/// Least-squares fit of w against (u, v, u^2/2, uv, v^2/2) through the frame
/// origin; the linear terms are dropped and (e, f, g) come from the rest.
/// A condition number of the normal equations above 1e8 yields a zero-curvature
/// result with degenerate = true.
FundamentalForms fit_fundamental_forms(std::span<const Vec3> neighborhood,
                                       const AugmentedJacobian& frame);

/// Curvatures and directions from given form coefficients.
FundamentalForms forms_from_coefficients(double e, double f, double g);

/// n = T (0,0,1)^T, i.e. the third column.
inline Vec3 normal_from_T(const AugmentedJacobian& T) { return T.t3; }

/// x_hat = origin + T (u,v,0)^T.
inline Vec3 lift_to_tangent(const AugmentedJacobian& T, const ParamSample& s) {
  return T.origin + s.u * T.t1 + s.v * T.t2;
}

/// (k1 u^2 + k2 v^2) / 2; s is in principal coordinates.
inline double normal_displacement(const FundamentalForms& forms, const ParamSample& s) {
  return 0.5 * (forms.k1 * s.u * s.u + forms.k2 * s.v * s.v);
}

/// Principal coordinates (along dir1, dir2) to frame coordinates (along t1, t2).
ParamSample principal_to_frame(const FundamentalForms& forms, const ParamSample& principal);
ParamSample frame_to_principal(const FundamentalForms& forms, const ParamSample& frame_uv);

/// Unit normal of the fitted quadric at principal sample s, in world
/// coordinates, on the same side as t3.
Vec3 quadric_normal(const FundamentalForms& forms, const ParamSample& s,
                    const AugmentedJacobian& frame);

struct Histogram {
  double lo = 0.0;
  double hi = 0.0;
  std::vector<std::size_t> counts;

  double bin_lo(std::size_t b) const { return lo + (hi - lo) * b / counts.size(); }
  double bin_hi(std::size_t b) const { return lo + (hi - lo) * (b + 1) / counts.size(); }
  std::size_t mode() const;
  std::size_t total() const;
};

struct FrameStats {
  std::vector<double> theta_deg;  // per non-degenerate frame
  std::size_t degenerate = 0;     // frames with zero-length t3 or t1 x t2
  Histogram theta;                // 30 bins over [0, 90] degrees
  Histogram delta;                // 50 bins over the data range

  /// Tab-separated report with one section per histogram.
  std::string to_tsv() const;
};

/// Unoriented angle between t3 and t1 x t2, in degrees within [0, 90].
double frame_angle_deg(const AugmentedJacobian& frame);

FrameStats frame_stats(std::span<const AugmentedJacobian> frames, std::span<const double> deltas);

}  // namespace geoup::local
