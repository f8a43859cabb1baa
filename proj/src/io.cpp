#include "geoup/io.hpp"

#include "geoup/error.hpp"

#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <string_view>

namespace geoup::io {

namespace {

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

void write_file(const std::filesystem::path& path, const std::string& contents) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
  if (!out) throw IoError("failed writing '" + path.string() + "'");
}

bool is_space(char c) { return c == ' ' || c == '\t' || c == '\r' || c == '\n' || c == '\f' || c == '\v'; }

std::vector<std::string_view> split_tokens(std::string_view line) {
  std::vector<std::string_view> tokens;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && is_space(line[i])) ++i;
    const std::size_t start = i;
    while (i < line.size() && !is_space(line[i])) ++i;
    if (i > start) tokens.push_back(line.substr(start, i - start));
  }
  return tokens;
}

template <typename Fn>
void for_each_line(std::string_view text, Fn&& fn) {
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t end = text.find('\n', pos);
    const std::size_t stop = end == std::string_view::npos ? text.size() : end;
    ++line_no;
    fn(text.substr(pos, stop - pos), line_no);
    if (end == std::string_view::npos) break;
    pos = end + 1;
  }
}

bool parse_double(std::string_view token, double& out) {
  if (!token.empty() && token.front() == '+') token.remove_prefix(1);
  const char* first = token.data();
  const char* last = token.data() + token.size();
  const auto [ptr, ec] = std::from_chars(first, last, out);
  return ec == std::errc() && ptr == last;
}

bool parse_long(std::string_view token, long long& out) {
  if (!token.empty() && token.front() == '+') token.remove_prefix(1);
  const char* first = token.data();
  const char* last = token.data() + token.size();
  const auto [ptr, ec] = std::from_chars(first, last, out);
  return ec == std::errc() && ptr == last;
}

Vec3 normalized_or_throw(const Vec3& n, std::size_t line) {
  const double len = n.norm();
  if (!(len > 0.0) || !std::isfinite(len)) throw ParseError("zero-length normal", line);
  return n / len;
}

void fan_triangulate(const std::vector<int>& polygon, std::vector<Triangle>& out) {
  for (std::size_t j = 1; j + 1 < polygon.size(); ++j) {
    out.push_back({polygon[0], polygon[j], polygon[j + 1]});
  }
}

std::string lowercase_extension(const std::filesystem::path& path) {
  std::string ext = path.extension().string();
  for (auto& c : ext) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return ext;
}

void append_vec(std::string& out, const Vec3& v) {
  out += format_number(v.x());
  out += ' ';
  out += format_number(v.y());
  out += ' ';
  out += format_number(v.z());
}

}  // namespace

std::string format_number(double value) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  if (ec != std::errc()) throw Error("number formatting failed");
  return std::string(buf, ptr);
}

PointCloud parse_xyz(const std::string& text) {
  PointCloud cloud;
  int columns = 0;
  for_each_line(text, [&](std::string_view line, std::size_t line_no) {
    const auto tokens = split_tokens(line);
    if (tokens.empty() || tokens.front().front() == '#') return;
    if (tokens.size() != 3 && tokens.size() != 6) {
      throw ParseError("expected 3 or 6 numbers, found " + std::to_string(tokens.size()), line_no);
    }
    const int arity = static_cast<int>(tokens.size());
    if (columns == 0) {
      columns = arity;
    } else if (columns != arity) {
      throw ParseError("mixed 3- and 6-column lines", line_no);
    }
    double values[6];
    for (int i = 0; i < arity; ++i) {
      if (!parse_double(tokens[i], values[i]) || !std::isfinite(values[i])) {
        throw ParseError("invalid number '" + std::string(tokens[i]) + "'", line_no);
      }
    }
    cloud.points.emplace_back(values[0], values[1], values[2]);
    if (arity == 6) {
      cloud.normals.push_back(normalized_or_throw(Vec3(values[3], values[4], values[5]), line_no));
    }
  });
  return cloud;
}

PointCloud read_xyz(const std::filesystem::path& path) { return parse_xyz(read_file(path)); }

std::string format_xyz(const PointCloud& cloud) {
  if (cloud.has_normals() && cloud.normals.size() != cloud.points.size()) {
    throw ArgumentError("normal count does not match point count");
  }
  std::string out;
  out.reserve(cloud.size() * (cloud.has_normals() ? 120 : 60));
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    append_vec(out, cloud.points[i]);
    if (cloud.has_normals()) {
      out += ' ';
      append_vec(out, cloud.normals[i]);
    }
    out += '\n';
  }
  return out;
}

void write_xyz(const PointCloud& cloud, const std::filesystem::path& path) {
  write_file(path, format_xyz(cloud));
}

TriangleMesh parse_obj(const std::string& text) {
  TriangleMesh mesh;
  std::vector<Vec3> normals;
  std::vector<int> polygon;
  for_each_line(text, [&](std::string_view line, std::size_t line_no) {
    const auto tokens = split_tokens(line);
    if (tokens.empty()) return;
    const std::string_view tag = tokens.front();
    if (tag == "v" || tag == "vn") {
      if (tokens.size() < 4) throw ParseError("'" + std::string(tag) + "' needs 3 numbers", line_no);
      double xyz[3];
      for (int i = 0; i < 3; ++i) {
        if (!parse_double(tokens[i + 1], xyz[i])) {
          throw ParseError("invalid number '" + std::string(tokens[i + 1]) + "'", line_no);
        }
      }
      (tag == "v" ? mesh.vertices : normals).emplace_back(xyz[0], xyz[1], xyz[2]);
    } else if (tag == "f") {
      polygon.clear();
      for (std::size_t i = 1; i < tokens.size(); ++i) {
        const std::string_view ref = tokens[i].substr(0, tokens[i].find('/'));
        long long index = 0;
        if (!parse_long(ref, index) || index == 0) {
          throw ParseError("invalid face index '" + std::string(tokens[i]) + "'", line_no);
        }
        const long long count = static_cast<long long>(mesh.vertices.size());
        const long long resolved = index > 0 ? index - 1 : count + index;
        if (resolved < 0 || resolved >= count) {
          throw FormatError("line " + std::to_string(line_no) + ": face index " +
                            std::to_string(index) + " out of range (" + std::to_string(count) +
                            " vertices)");
        }
        polygon.push_back(static_cast<int>(resolved));
      }
      if (polygon.size() < 3) throw ParseError("face needs at least 3 vertices", line_no);
      fan_triangulate(polygon, mesh.triangles);
    }
  });
  validate_mesh(mesh);
  if (!normals.empty() && normals.size() == mesh.vertices.size()) {
    mesh.normals.reserve(normals.size());
    for (const auto& n : normals) {
      const double len = n.norm();
      mesh.normals.push_back(len > 0.0 ? Vec3(n / len) : Vec3(0.0, 0.0, 1.0));
    }
  } else {
    mesh.normals = compute_vertex_normals(mesh);
  }
  return mesh;
}

TriangleMesh parse_ply(const std::string& text) {
  struct Property {
    std::string name;
    bool is_list = false;
  };
  struct Element {
    std::string name;
    std::size_t count = 0;
    std::vector<Property> properties;
  };

  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  if (!std::getline(in, line) || split_tokens(line).empty() || split_tokens(line)[0] != "ply") {
    throw FormatError("missing 'ply' magic");
  }
  ++line_no;
  std::vector<Element> elements;
  bool ascii = false;
  bool header_done = false;
  while (std::getline(in, line)) {
    ++line_no;
    const auto tokens = split_tokens(line);
    if (tokens.empty()) continue;
    if (tokens[0] == "format") {
      if (tokens.size() < 2) throw ParseError("malformed format line", line_no);
      if (tokens[1] != "ascii") {
        throw UnsupportedFormatError("PLY format '" + std::string(tokens[1]) +
                                     "' is not supported; only ascii");
      }
      ascii = true;
    } else if (tokens[0] == "element") {
      long long count = 0;
      if (tokens.size() != 3 || !parse_long(tokens[2], count) || count < 0) {
        throw ParseError("malformed element line", line_no);
      }
      elements.push_back({std::string(tokens[1]), static_cast<std::size_t>(count), {}});
    } else if (tokens[0] == "property") {
      if (elements.empty()) throw ParseError("property before element", line_no);
      if (tokens.size() >= 5 && tokens[1] == "list") {
        elements.back().properties.push_back({std::string(tokens[4]), true});
      } else if (tokens.size() == 3) {
        elements.back().properties.push_back({std::string(tokens[2]), false});
      } else {
        throw ParseError("malformed property line", line_no);
      }
    } else if (tokens[0] == "end_header") {
      header_done = true;
      break;
    }
  }
  if (!header_done) throw FormatError("PLY header has no end_header");
  if (!ascii) throw FormatError("PLY header has no format line");

  // Body: whitespace-separated tokens consumed element by element.
  std::string body((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  const auto tokens = split_tokens(body);
  std::size_t cursor = 0;
  auto next_number = [&]() -> double {
    if (cursor >= tokens.size()) throw FormatError("PLY body ends early");
    double value = 0.0;
    if (!parse_double(tokens[cursor], value)) {
      throw FormatError("PLY body has invalid number '" + std::string(tokens[cursor]) + "'");
    }
    ++cursor;
    return value;
  };

  TriangleMesh mesh;
  std::vector<Vec3> normals;
  bool have_normals = false;
  std::vector<int> polygon;
  for (const auto& element : elements) {
    if (element.name == "vertex") {
      int ix = -1, iy = -1, iz = -1, inx = -1, iny = -1, inz = -1;
      for (std::size_t p = 0; p < element.properties.size(); ++p) {
        const auto& name = element.properties[p].name;
        const int idx = static_cast<int>(p);
        if (name == "x") ix = idx;
        if (name == "y") iy = idx;
        if (name == "z") iz = idx;
        if (name == "nx") inx = idx;
        if (name == "ny") iny = idx;
        if (name == "nz") inz = idx;
      }
      if (ix < 0 || iy < 0 || iz < 0) throw FormatError("PLY vertex lacks x/y/z");
      have_normals = inx >= 0 && iny >= 0 && inz >= 0;
      std::vector<double> row(element.properties.size());
      for (std::size_t v = 0; v < element.count; ++v) {
        for (std::size_t p = 0; p < element.properties.size(); ++p) {
          if (element.properties[p].is_list) {
            const auto n = static_cast<std::size_t>(next_number());
            for (std::size_t j = 0; j < n; ++j) next_number();
            row[p] = 0.0;
          } else {
            row[p] = next_number();
          }
        }
        mesh.vertices.emplace_back(row[ix], row[iy], row[iz]);
        if (have_normals) normals.emplace_back(row[inx], row[iny], row[inz]);
      }
    } else if (element.name == "face") {
      for (std::size_t f = 0; f < element.count; ++f) {
        polygon.clear();
        for (const auto& prop : element.properties) {
          if (!prop.is_list) {
            next_number();
            continue;
          }
          const auto n = static_cast<std::size_t>(next_number());
          const bool is_index = prop.name == "vertex_indices" || prop.name == "vertex_index";
          for (std::size_t j = 0; j < n; ++j) {
            const double value = next_number();
            if (!is_index) continue;
            if (value < 0.0 || value >= static_cast<double>(mesh.vertices.size())) {
              throw FormatError("PLY face " + std::to_string(f) + " index " +
                                format_number(value) + " out of range");
            }
            polygon.push_back(static_cast<int>(value));
          }
        }
        if (polygon.size() < 3) throw FormatError("PLY face " + std::to_string(f) + " has < 3 vertices");
        fan_triangulate(polygon, mesh.triangles);
      }
    } else {
      for (std::size_t e = 0; e < element.count; ++e) {
        for (const auto& prop : element.properties) {
          if (prop.is_list) {
            const auto n = static_cast<std::size_t>(next_number());
            for (std::size_t j = 0; j < n; ++j) next_number();
          } else {
            next_number();
          }
        }
      }
    }
  }
  validate_mesh(mesh);
  bool usable = have_normals;
  for (const auto& n : normals) usable = usable && n.norm() > 0.0;
  if (usable) {
    for (const auto& n : normals) mesh.normals.push_back(n / n.norm());
  } else {
    mesh.normals = compute_vertex_normals(mesh);
  }
  return mesh;
}

TriangleMesh read_mesh(const std::filesystem::path& path) {
  const std::string ext = lowercase_extension(path);
  if (ext == ".obj") return parse_obj(read_file(path));
  if (ext == ".ply") return parse_ply(read_file(path));
  throw UnsupportedFormatError("unsupported mesh extension '" + ext + "' (expected .obj or .ply)");
}

std::string format_obj(const TriangleMesh& mesh) {
  std::string out;
  for (const auto& v : mesh.vertices) {
    out += "v ";
    append_vec(out, v);
    out += '\n';
  }
  for (const auto& n : mesh.normals) {
    out += "vn ";
    append_vec(out, n);
    out += '\n';
  }
  const bool with_normals = mesh.has_normals();
  for (const auto& t : mesh.triangles) {
    out += 'f';
    for (int v : t) {
      out += ' ';
      out += std::to_string(v + 1);
      if (with_normals) {
        out += "//";
        out += std::to_string(v + 1);
      }
    }
    out += '\n';
  }
  return out;
}

std::string format_ply(const TriangleMesh& mesh) {
  const bool with_normals = mesh.has_normals();
  std::string out = "ply\nformat ascii 1.0\nelement vertex " + std::to_string(mesh.vertices.size()) +
                    "\nproperty double x\nproperty double y\nproperty double z\n";
  if (with_normals) out += "property double nx\nproperty double ny\nproperty double nz\n";
  out += "element face " + std::to_string(mesh.triangles.size()) +
         "\nproperty list uchar int vertex_indices\nend_header\n";
  for (std::size_t i = 0; i < mesh.vertices.size(); ++i) {
    append_vec(out, mesh.vertices[i]);
    if (with_normals) {
      out += ' ';
      append_vec(out, mesh.normals[i]);
    }
    out += '\n';
  }
  for (const auto& t : mesh.triangles) {
    out += "3 " + std::to_string(t[0]) + ' ' + std::to_string(t[1]) + ' ' + std::to_string(t[2]) + '\n';
  }
  return out;
}

void write_mesh(const TriangleMesh& mesh, const std::filesystem::path& path) {
  const std::string ext = lowercase_extension(path);
  if (ext == ".obj") return write_file(path, format_obj(mesh));
  if (ext == ".ply") return write_file(path, format_ply(mesh));
  throw UnsupportedFormatError("unsupported mesh extension '" + ext + "' (expected .obj or .ply)");
}

}  // namespace geoup::io
