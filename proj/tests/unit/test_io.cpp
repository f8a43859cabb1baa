#include "doctest.h"

#include "geoup/error.hpp"
#include "geoup/io.hpp"
#include "geoup/rng.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <string>

using namespace geoup;
namespace fs = std::filesystem;

namespace {

fs::path temp_file(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "geoup_unit_io";
  fs::create_directories(dir);
  return dir / name;
}

}  // namespace

TEST_CASE("xyz parsing") {
  const PointCloud a = io::parse_xyz("0 0 0\n");
  REQUIRE(a.size() == 1);
  CHECK(a.points[0] == Vec3::Zero());
  CHECK_FALSE(a.has_normals());

  const PointCloud b = io::parse_xyz("1 2 3 0 0 2\n");
  CHECK(b.points[0] == Vec3(1, 2, 3));
  CHECK(b.normals[0] == Vec3(0, 0, 1));

  try {
    io::parse_xyz("1 2\n");
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    CHECK(e.line() == 1);
  }
  CHECK_THROWS_AS(io::parse_xyz("0 0 0\n1 1 1 0 0 1\n"), ParseError);
  try {
    io::parse_xyz("0 0 0\n1 x 1\n");
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    CHECK(e.line() == 2);
  }
}

TEST_CASE("xyz writing and round trip") {
  CHECK(io::format_xyz({{Vec3(1, 2, 3)}, {}}) == "1 2 3\n");
  const std::string six = io::format_xyz({{Vec3(1, 2, 3)}, {Vec3(0, 0, 1)}});
  CHECK(six == "1 2 3 0 0 1\n");

  Pcg32 rng(9);
  PointCloud c;
  for (int i = 0; i < 100; ++i) {
    c.points.emplace_back(rng.uniform(-10, 10), rng.uniform(-10, 10), rng.uniform(-10, 10));
    c.normals.push_back(Vec3(rng.uniform(-1, 1), rng.uniform(-1, 1), 1).normalized());
  }
  const fs::path path = temp_file("roundtrip.xyz");
  io::write_xyz(c, path);
  const PointCloud r = io::read_xyz(path);
  REQUIRE(r.size() == 100);
  double dev = 0.0;
  for (int i = 0; i < 100; ++i) dev = std::max(dev, (r.points[i] - c.points[i]).cwiseAbs().maxCoeff());
  CHECK(dev < 1e-6);
  for (const auto& n : r.normals) CHECK(std::abs(n.norm() - 1.0) < 1e-5);
}

TEST_CASE("format_number round trips exactly") {
  Pcg32 rng(1);
  for (int i = 0; i < 1000; ++i) {
    const double v = rng.uniform(-1e6, 1e6) * std::pow(10.0, rng.uniform(-12, 2));
    CHECK(std::stod(io::format_number(v)) == v);
  }
  CHECK(io::format_number(0.5) == "0.5");
}

TEST_CASE("unwritable path raises an io error") {
  CHECK_THROWS_AS(io::write_xyz({{Vec3::Zero()}, {}}, "/nonexistent_dir_geoup/x.xyz"), IoError);
  CHECK_THROWS_AS(io::read_xyz("/nonexistent_dir_geoup/x.xyz"), IoError);
}

TEST_CASE("obj parsing") {
  const TriangleMesh tri = io::parse_obj("v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 2 3\n");
  CHECK(tri.triangles.size() == 1);
  REQUIRE(tri.normals.size() == 3);
  CHECK(tri.normals[0].isApprox(Vec3(0, 0, 1)));

  const TriangleMesh quad = io::parse_obj("v 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nf 1 2 3 4\n");
  REQUIRE(quad.triangles.size() == 2);
  CHECK(quad.triangles[0] == Triangle{0, 1, 2});
  CHECK(quad.triangles[1] == Triangle{0, 2, 3});

  CHECK_THROWS_AS(io::parse_obj("v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 2 5\n"), FormatError);
  // Slash records and negative indices.
  const TriangleMesh rel = io::parse_obj("v 0 0 0\nv 1 0 0\nv 0 1 0\nvn 0 0 1\nf 1//1 2//1 -1//1\n");
  CHECK(rel.triangles[0] == Triangle{0, 1, 2});
}

TEST_CASE("ply parsing") {
  const std::string ascii =
      "ply\nformat ascii 1.0\nelement vertex 3\nproperty float x\nproperty float y\nproperty float z\n"
      "element face 1\nproperty list uchar int vertex_indices\nend_header\n0 0 0\n1 0 0\n0 1 0\n3 0 1 2\n";
  const TriangleMesh m = io::parse_ply(ascii);
  CHECK(m.vertices.size() == 3);
  CHECK(m.triangles.size() == 1);
  const std::string binary =
      "ply\nformat binary_little_endian 1.0\nelement vertex 0\nproperty float x\nend_header\n";
  CHECK_THROWS_AS(io::parse_ply(binary), UnsupportedFormatError);
}

TEST_CASE("mesh round trip through both formats") {
  const TriangleMesh m = io::parse_obj("v 0 0 0\nv 1 0 0\nv 1 1 0.5\nv 0 1 0.25\nf 1 2 3 4\n");
  for (const char* name : {"mesh.obj", "mesh.ply"}) {
    const fs::path path = temp_file(name);
    io::write_mesh(m, path);
    const TriangleMesh r = io::read_mesh(path);
    REQUIRE(r.vertices.size() == m.vertices.size());
    CHECK(r.triangles == m.triangles);
    for (std::size_t i = 0; i < m.vertices.size(); ++i) {
      CHECK((r.vertices[i] - m.vertices[i]).cwiseAbs().maxCoeff() < 1e-6);
      CHECK(std::abs(r.normals[i].norm() - 1.0) < 1e-5);
    }
  }
  CHECK_THROWS_AS(io::read_mesh(temp_file("mesh.stl")), UnsupportedFormatError);
}
