#include "geoup/geometry.hpp"

#include "geoup/error.hpp"

#include <Eigen/Geometry>

#include <string>

namespace geoup {

double triangle_area(const Vec3& a, const Vec3& b, const Vec3& c) {
  return 0.5 * (b - a).cross(c - a).norm();
}

double surface_area(const TriangleMesh& mesh) {
  double total = 0.0;
  for (const auto& t : mesh.triangles) {
    total += triangle_area(mesh.vertices[t[0]], mesh.vertices[t[1]], mesh.vertices[t[2]]);
  }
  return total;
}

std::vector<Vec3> compute_vertex_normals(const TriangleMesh& mesh) {
  std::vector<Vec3> normals(mesh.vertices.size(), Vec3::Zero());
  for (const auto& t : mesh.triangles) {
    const Vec3& a = mesh.vertices[t[0]];
    const Vec3& b = mesh.vertices[t[1]];
    const Vec3& c = mesh.vertices[t[2]];
    // Cross product length is twice the area, so this is area weighting.
    const Vec3 n = (b - a).cross(c - a);
    for (int v : t) normals[v] += n;
  }
  for (auto& n : normals) {
    const double len = n.norm();
    n = len > 0.0 ? Vec3(n / len) : Vec3(0.0, 0.0, 1.0);
  }
  return normals;
}

void validate_mesh(const TriangleMesh& mesh) {
  const auto count = static_cast<long long>(mesh.vertices.size());
  for (std::size_t i = 0; i < mesh.triangles.size(); ++i) {
    const auto& t = mesh.triangles[i];
    for (int v : t) {
      if (v < 0 || v >= count) {
        throw FormatError("triangle " + std::to_string(i) + " references vertex " +
                          std::to_string(v) + " but mesh has " + std::to_string(count) +
                          " vertices");
      }
    }
    if (t[0] == t[1] || t[1] == t[2] || t[0] == t[2]) {
      throw FormatError("triangle " + std::to_string(i) + " repeats a vertex index");
    }
  }
  if (mesh.has_normals() && mesh.normals.size() != mesh.vertices.size()) {
    throw FormatError("vertex normal count does not match vertex count");
  }
}

Aabb bounding_box(std::span<const Vec3> points) {
  Aabb box;
  for (const auto& p : points) box.expand(p);
  return box;
}

}  // namespace geoup
