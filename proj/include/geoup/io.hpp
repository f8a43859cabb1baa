#pragma once

#include "geoup/geometry.hpp"

#include <filesystem>
#include <string>

namespace geoup::io {

/// Reads whitespace-separated `x y z` or `x y z nx ny nz` lines. Blank lines and
/// lines starting with '#' are skipped. Normals are normalized on load.
/// Throws ParseError (with line number) on malformed lines or mixed arity.
PointCloud read_xyz(const std::filesystem::path& path);

/// Writes 3 or 6 columns per point using the shortest decimal that
/// round-trips each double.
void write_xyz(const PointCloud& cloud, const std::filesystem::path& path);

/// Same encoding as write_xyz, into a string.
std::string format_xyz(const PointCloud& cloud);
PointCloud parse_xyz(const std::string& text);

/// Dispatches on extension: .obj (v/f, faces fan-triangulated) or .ply
/// (ASCII only; binary raises UnsupportedFormatError). Vertex normals are
/// taken from PLY nx/ny/nz when present, otherwise computed.
TriangleMesh read_mesh(const std::filesystem::path& path);
TriangleMesh parse_obj(const std::string& text);
TriangleMesh parse_ply(const std::string& text);

/// .obj or .ply by extension. PLY output carries per-vertex normals.
void write_mesh(const TriangleMesh& mesh, const std::filesystem::path& path);
std::string format_obj(const TriangleMesh& mesh);
std::string format_ply(const TriangleMesh& mesh);

/// Shortest round-trip decimal for a double.
std::string format_number(double value);

}  // namespace geoup::io
