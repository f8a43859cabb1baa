#pragma once

#include <Eigen/Core>

#include <array>
#include <cstddef>
#include <limits>
#include <span>
#include <vector>

namespace geoup {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

/// Squared Euclidean distance with a fixed evaluation order. Every nearest
/// neighbor path in the library ranks candidates with this function so that
/// accelerated and brute-force searches agree bit for bit.
inline double squared_distance(const Vec3& a, const Vec3& b) {
  const double dx = a.x() - b.x();
  const double dy = a.y() - b.y();
  const double dz = a.z() - b.z();
  return dx * dx + dy * dy + dz * dz;
}

struct PointCloud {
  std::vector<Vec3> points;
  /// Empty, or one unit normal per point.
  std::vector<Vec3> normals;

  std::size_t size() const { return points.size(); }
  bool has_normals() const { return !normals.empty(); }
};

using Triangle = std::array<int, 3>;

struct TriangleMesh {
  std::vector<Vec3> vertices;
  std::vector<Triangle> triangles;
  /// Empty, or one unit normal per vertex.
  std::vector<Vec3> normals;

  bool has_normals() const { return !normals.empty(); }
};

/// Area-weighted average of incident face normals, normalized. Vertices with
/// no non-degenerate incident face get (0,0,1).
std::vector<Vec3> compute_vertex_normals(const TriangleMesh& mesh);

double triangle_area(const Vec3& a, const Vec3& b, const Vec3& c);
double surface_area(const TriangleMesh& mesh);

/// Throws FormatError if an index is out of range or a triangle repeats a vertex.
void validate_mesh(const TriangleMesh& mesh);

struct Aabb {
  Vec3 lo = Vec3::Constant(std::numeric_limits<double>::infinity());
  Vec3 hi = Vec3::Constant(-std::numeric_limits<double>::infinity());

  void expand(const Vec3& p) {
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
  }
  Vec3 extent() const { return hi - lo; }
};

Aabb bounding_box(std::span<const Vec3> points);

/// Result of an upsampling pass over N source points with factor R.
/// Sample r of source i lives at index i*R + r.
struct UpsampleResult {
  std::vector<Vec3> points;          // R*N
  std::vector<Vec3> normals;         // R*N, unit
  std::vector<Vec3> coarse_normals;  // N, unit
  std::vector<double> deltas;        // R*N
  std::vector<int> parent;           // R*N
  std::size_t factor = 0;
  std::size_t degenerate_frames = 0;
  std::size_t degenerate_fits = 0;
};

}  // namespace geoup
