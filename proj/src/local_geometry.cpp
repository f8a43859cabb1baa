#include "geoup/local_geometry.hpp"

#include "geoup/error.hpp"
#include "geoup/io.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/Geometry>
#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

namespace geoup::local {

namespace {

constexpr double kMaxCondition = 1e8;
constexpr double kRadToDeg = 180.0 / std::numbers::pi;

}  // namespace

AugmentedJacobian estimate_frame(std::span<const Vec3> neighborhood, const Vec3& center) {
  if (neighborhood.size() < 6) {
    throw ArgumentError("estimate_frame: need at least 6 points, got " +
                        std::to_string(neighborhood.size()));
  }
  Vec3 centroid = Vec3::Zero();
  for (const auto& p : neighborhood) centroid += p;
  centroid /= static_cast<double>(neighborhood.size());
  Mat3 cov = Mat3::Zero();
  for (const auto& p : neighborhood) {
    const Vec3 d = p - centroid;
    cov.noalias() += d * d.transpose();
  }
  cov /= static_cast<double>(neighborhood.size());

  const Eigen::SelfAdjointEigenSolver<Mat3> eig(cov);
  const Vec3 lambda = eig.eigenvalues();  // ascending
  if (!(lambda(2) > 0.0) || lambda(1) <= 1e-12 * lambda(2)) {
    throw GeometryError("estimate_frame: neighborhood is collinear or coincident");
  }
  Vec3 normal = eig.eigenvectors().col(0).normalized();
  const Vec3 major = eig.eigenvectors().col(2);

  const Vec3 toward = centroid - center;
  const double lean = toward.dot(normal);
  double sign = 1.0;
  if (std::abs(lean) > 1e-10 * std::sqrt(lambda(2))) {
    sign = lean < 0.0 ? -1.0 : 1.0;
  } else {
    for (int axis : {2, 0, 1}) {
      if (std::abs(normal[axis]) > 1e-12) {
        sign = normal[axis] < 0.0 ? -1.0 : 1.0;
        break;
      }
    }
  }
  normal *= sign;

  AugmentedJacobian frame;
  frame.origin = center;
  frame.t1 = (major - major.dot(normal) * normal).normalized();
  frame.t2 = normal.cross(frame.t1).normalized();
  frame.t3 = frame.t1.cross(frame.t2);
  return frame;
}

FundamentalForms forms_from_coefficients(double e, double f, double g) {
  FundamentalForms forms;
  forms.e = e;
  forms.f = f;
  forms.g = g;
  Eigen::Matrix2d second;
  second << e, f, f, g;
  const Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> eig(second);
  forms.k1 = eig.eigenvalues()(1);
  forms.k2 = eig.eigenvalues()(0);
  if (forms.k1 == forms.k2) {
    forms.dir1 = Vec2::UnitX();
  } else {
    forms.dir1 = eig.eigenvectors().col(1).normalized();
    // Canonical sign: first nonzero component positive.
    if (forms.dir1.x() < 0.0 || (forms.dir1.x() == 0.0 && forms.dir1.y() < 0.0)) forms.dir1 = -forms.dir1;
  }
  forms.dir2 = Vec2(-forms.dir1.y(), forms.dir1.x());
  return forms;
}

FundamentalForms fit_fundamental_forms(std::span<const Vec3> neighborhood,
                                       const AugmentedJacobian& frame) {
  if (neighborhood.size() < 6) {
    throw ArgumentError("fit_fundamental_forms: need at least 6 points, got " +
                        std::to_string(neighborhood.size()));
  }
  // Linear terms absorb the residual tilt of the PCA frame; only the
  // quadratic coefficients are kept. Coordinates are scaled by the
  // neighborhood radius so the condition test is scale free.
  const auto rows = static_cast<Eigen::Index>(neighborhood.size());
  double radius = 0.0;
  for (const auto& p : neighborhood) radius = std::max(radius, (p - frame.origin).norm());
  if (!(radius > 0.0)) {
    FundamentalForms flat;
    flat.degenerate = true;
    return flat;
  }
  Eigen::MatrixXd design(rows, 5);
  Eigen::VectorXd height(rows);
  for (Eigen::Index i = 0; i < rows; ++i) {
    const Vec3 d = (neighborhood[i] - frame.origin) / radius;
    const double u = d.dot(frame.t1);
    const double v = d.dot(frame.t2);
    design.row(i) << u, v, 0.5 * u * u, u * v, 0.5 * v * v;
    height(i) = d.dot(frame.t3);
  }
  const Eigen::JacobiSVD<Eigen::MatrixXd> svd(design, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Eigen::VectorXd sigma = svd.singularValues();
  const double smax = sigma(0);
  const double smin = sigma(4);
  // Condition of the normal equations is the square of the design's.
  if (!(smin > 0.0) || (smax / smin) * (smax / smin) > kMaxCondition) {
    FundamentalForms flat;
    flat.degenerate = true;
    return flat;
  }
  const Eigen::VectorXd coeff = svd.solve(height) / radius;
  return forms_from_coefficients(coeff(2), coeff(3), coeff(4));
}

ParamSample principal_to_frame(const FundamentalForms& forms, const ParamSample& principal) {
  const Vec2 uv = principal.u * forms.dir1 + principal.v * forms.dir2;
  return {uv.x(), uv.y()};
}

ParamSample frame_to_principal(const FundamentalForms& forms, const ParamSample& frame_uv) {
  const Vec2 uv(frame_uv.u, frame_uv.v);
  return {uv.dot(forms.dir1), uv.dot(forms.dir2)};
}

Vec3 quadric_normal(const FundamentalForms& forms, const ParamSample& s,
                    const AugmentedJacobian& frame) {
  const Vec3 local = Vec3(-forms.k1 * s.u, -forms.k2 * s.v, 1.0).normalized();
  const Vec3 e1 = forms.dir1.x() * frame.t1 + forms.dir1.y() * frame.t2;
  const Vec3 e2 = forms.dir2.x() * frame.t1 + forms.dir2.y() * frame.t2;
  return (local.x() * e1 + local.y() * e2 + local.z() * frame.t3).normalized();
}

std::size_t Histogram::mode() const {
  return static_cast<std::size_t>(std::max_element(counts.begin(), counts.end()) - counts.begin());
}

std::size_t Histogram::total() const {
  std::size_t sum = 0;
  for (auto c : counts) sum += c;
  return sum;
}

double frame_angle_deg(const AugmentedJacobian& frame) {
  const Vec3 c = frame.t1.cross(frame.t2);
  if (!(frame.t3.norm() > 0.0) || !(c.norm() > 0.0)) return std::numeric_limits<double>::quiet_NaN();
  return kRadToDeg * std::atan2(frame.t3.cross(c).norm(), std::abs(frame.t3.dot(c)));
}

namespace {

Histogram make_histogram(std::span<const double> values, std::size_t bins, double lo, double hi) {
  Histogram h;
  h.lo = lo;
  h.hi = hi;
  h.counts.assign(bins, 0);
  for (double v : values) {
    const double t = (v - lo) / (hi - lo);
    auto b = static_cast<long long>(std::floor(t * static_cast<double>(bins)));
    b = std::clamp<long long>(b, 0, static_cast<long long>(bins) - 1);
    ++h.counts[static_cast<std::size_t>(b)];
  }
  return h;
}

void append_histogram(std::string& out, const std::string& name, const Histogram& h) {
  out += "section\t" + name + "\n";
  out += "bins\t" + std::to_string(h.counts.size()) + "\n";
  out += "range\t" + io::format_number(h.lo) + "\t" + io::format_number(h.hi) + "\n";
  out += "bin_lo\tbin_hi\tcount\n";
  for (std::size_t b = 0; b < h.counts.size(); ++b) {
    out += io::format_number(h.bin_lo(b)) + "\t" + io::format_number(h.bin_hi(b)) + "\t" +
           std::to_string(h.counts[b]) + "\n";
  }
}

}  // namespace

FrameStats frame_stats(std::span<const AugmentedJacobian> frames, std::span<const double> deltas) {
  FrameStats stats;
  stats.theta_deg.reserve(frames.size());
  for (const auto& frame : frames) {
    const double theta = frame_angle_deg(frame);
    if (std::isnan(theta)) {
      ++stats.degenerate;
    } else {
      stats.theta_deg.push_back(theta);
    }
  }
  stats.theta = make_histogram(stats.theta_deg, 30, 0.0, 90.0);

  double lo = 0.0;
  double hi = 0.0;
  if (!deltas.empty()) {
    const auto [mn, mx] = std::minmax_element(deltas.begin(), deltas.end());
    lo = *mn;
    hi = *mx;
  }
  if (!(hi > lo)) {
    const double pad = 1e-9 * std::max(1.0, std::abs(lo));
    lo -= pad;
    hi += pad;
  }
  stats.delta = make_histogram(deltas, 50, lo, hi);
  return stats;
}

std::string FrameStats::to_tsv() const {
  std::string out;
  std::size_t below3 = 0;
  for (double t : theta_deg) below3 += t < 3.0 ? 1 : 0;
  out += "frames\t" + std::to_string(theta_deg.size() + degenerate) + "\n";
  out += "degenerate\t" + std::to_string(degenerate) + "\n";
  out += "theta_below_3deg\t" +
         io::format_number(theta_deg.empty() ? 0.0 : static_cast<double>(below3) / theta_deg.size()) +
         "\n";
  append_histogram(out, "theta_deg", theta);
  append_histogram(out, "delta", delta);
  return out;
}

}  // namespace geoup::local
