#include "geoup/analytic_upsampler.hpp"
#include "geoup/error.hpp"
#include "geoup/io.hpp"
#include "geoup/local_geometry.hpp"
#include "geoup/metrics.hpp"
#include "geoup/model.hpp"
#include "geoup/sampling.hpp"
#include "geoup/trainer.hpp"

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

namespace py = pybind11;
using namespace geoup;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

std::vector<Vec3> to_points(const Array& a) {
  if (a.ndim() != 2 || a.shape(1) != 3) throw ArgumentError("expected an (n, 3) array");
  const auto r = a.unchecked<2>();
  std::vector<Vec3> out(static_cast<std::size_t>(a.shape(0)));
  for (py::ssize_t i = 0; i < a.shape(0); ++i) out[i] = Vec3(r(i, 0), r(i, 1), r(i, 2));
  return out;
}

Array from_points(std::span<const Vec3> pts) {
  Array a({static_cast<py::ssize_t>(pts.size()), py::ssize_t{3}});
  auto w = a.mutable_unchecked<2>();
  for (std::size_t i = 0; i < pts.size(); ++i)
    for (int j = 0; j < 3; ++j) w(i, j) = pts[i][j];
  return a;
}

template <class T>
py::array_t<T> from_vector(const std::vector<T>& v) {
  py::array_t<T> a(static_cast<py::ssize_t>(v.size()));
  std::copy(v.begin(), v.end(), a.mutable_data());
  return a;
}

TriangleMesh to_mesh(const Array& vertices, const py::array_t<int, py::array::c_style | py::array::forcecast>& faces) {
  TriangleMesh m;
  m.vertices = to_points(vertices);
  if (faces.ndim() != 2 || faces.shape(1) != 3) throw ArgumentError("expected an (m, 3) face array");
  const auto f = faces.unchecked<2>();
  for (py::ssize_t i = 0; i < faces.shape(0); ++i) m.triangles.push_back({f(i, 0), f(i, 1), f(i, 2)});
  validate_mesh(m);
  return m;
}

py::tuple cloud_tuple(const PointCloud& c) {
  return py::make_tuple(from_points(c.points), c.has_normals() ? py::object(from_points(c.normals)) : py::none());
}

PointCloud to_cloud(const Array& points, const std::optional<Array>& normals) {
  PointCloud c;
  c.points = to_points(points);
  if (normals) c.normals = to_points(*normals);
  return c;
}

py::dict result_dict(const UpsampleResult& r) {
  py::dict d;
  d["points"] = from_points(r.points);
  d["normals"] = from_points(r.normals);
  d["coarse_normals"] = from_points(r.coarse_normals);
  d["deltas"] = from_vector(r.deltas);
  d["parent"] = from_vector(r.parent);
  d["degenerate_frames"] = r.degenerate_frames;
  d["degenerate_fits"] = r.degenerate_fits;
  return d;
}

}  // namespace

PYBIND11_MODULE(_geoup, m) {
  m.doc() = "Geometry-centric point cloud upsampling";

  auto base = py::register_exception<Error>(m, "GeoupError", PyExc_RuntimeError);
  py::register_exception<IoError>(m, "IoError", base.ptr());
  py::register_exception<FormatError>(m, "FormatError", base.ptr());
  py::register_exception<GeometryError>(m, "GeometryError", base.ptr());
  py::register_exception<NumericalError>(m, "NumericalError", base.ptr());
  py::register_exception<ArgumentError>(m, "ArgumentError", PyExc_ValueError);

  m.def("read_xyz", [](const std::filesystem::path& p) { return cloud_tuple(io::read_xyz(p)); }, py::arg("path"),
        "Returns (points, normals or None).");
  m.def(
      "write_xyz",
      [](const std::filesystem::path& p, const Array& points, const std::optional<Array>& normals) {
        io::write_xyz(to_cloud(points, normals), p);
      },
      py::arg("path"), py::arg("points"), py::arg("normals") = py::none());
  m.def(
      "read_mesh",
      [](const std::filesystem::path& p) {
        const TriangleMesh mesh = io::read_mesh(p);
        py::array_t<int> faces({static_cast<py::ssize_t>(mesh.triangles.size()), py::ssize_t{3}});
        auto w = faces.mutable_unchecked<2>();
        for (std::size_t i = 0; i < mesh.triangles.size(); ++i)
          for (int j = 0; j < 3; ++j) w(i, j) = mesh.triangles[i][j];
        return py::make_tuple(from_points(mesh.vertices), faces);
      },
      py::arg("path"), "Returns (vertices, faces).");

  m.def(
      "poisson_disk_sample",
      [](const Array& v, const py::array_t<int, py::array::c_style | py::array::forcecast>& f, std::size_t n,
         std::uint64_t seed) { return cloud_tuple(sampling::poisson_disk_sample(to_mesh(v, f), n, seed)); },
      py::arg("vertices"), py::arg("faces"), py::arg("n"), py::arg("seed") = 42);
  m.def(
      "farthest_point_sample",
      [](const Array& p, std::size_t count, std::size_t seed_index) {
        return from_vector(sampling::farthest_point_sample(to_points(p), count, seed_index));
      },
      py::arg("points"), py::arg("count"), py::arg("seed_index") = 0);

  m.def(
      "upsample_analytic",
      [](const Array& p, std::size_t factor, std::size_t neighbors, bool displace, const std::string& pattern,
         std::uint64_t seed) {
        analytic::AnalyticOptions o;
        o.factor = factor;
        o.neighbors = neighbors;
        o.displace = displace;
        o.pattern.kind = analytic::parse_pattern(pattern);
        o.seed = seed;
        const std::vector<Vec3> pts = to_points(p);
        analytic::AnalyticResult r;
        {
          py::gil_scoped_release release;
          r = analytic::upsample_analytic(pts, o);
        }
        return result_dict(r.result);
      },
      py::arg("points"), py::arg("factor") = 4, py::arg("neighbors") = local::kDefaultNeighbors,
      py::arg("displace") = true, py::arg("pattern") = "fibonacci_disk", py::arg("seed") = 42);

  m.def(
      "curvatures",
      [](const Array& p, std::size_t neighbors) {
        analytic::AnalyticOptions o;
        o.factor = 1;
        o.neighbors = neighbors;
        const auto r = analytic::upsample_analytic(to_points(p), o);
        py::array_t<double> k({static_cast<py::ssize_t>(r.forms.size()), py::ssize_t{2}});
        auto w = k.mutable_unchecked<2>();
        std::vector<Vec3> normals;
        for (std::size_t i = 0; i < r.forms.size(); ++i) {
          w(i, 0) = r.forms[i].k1;
          w(i, 1) = r.forms[i].k2;
          normals.push_back(r.frames[i].t3);
        }
        return py::make_tuple(k, from_points(normals));
      },
      py::arg("points"), py::arg("neighbors") = local::kDefaultNeighbors,
      "Per point principal curvatures (n, 2) and frame normals (n, 3).");

  m.def(
      "chamfer",
      [](const Array& x, const Array& y, bool symmetric_mean) {
        return metrics::chamfer(to_points(x), to_points(y),
                                symmetric_mean ? metrics::ChamferNorm::symmetric_mean
                                               : metrics::ChamferNorm::target_count);
      },
      py::arg("x"), py::arg("y"), py::arg("symmetric_mean") = false);
  m.def(
      "hausdorff", [](const Array& x, const Array& y) { return metrics::hausdorff(to_points(x), to_points(y)); },
      py::arg("x"), py::arg("y"));
  m.def(
      "jsd",
      [](const Array& x, const Array& y, std::size_t grid) { return metrics::jsd(to_points(x), to_points(y), grid); },
      py::arg("x"), py::arg("y"), py::arg("grid") = 32);
  m.def(
      "p2f",
      [](const Array& p, const Array& v, const py::array_t<int, py::array::c_style | py::array::forcecast>& f) {
        const auto s = metrics::p2f(to_points(p), to_mesh(v, f));
        return py::make_tuple(s.mean, s.std);
      },
      py::arg("points"), py::arg("vertices"), py::arg("faces"), "Returns (mean, std) point-to-surface distance.");

  m.def(
      "upsample_model",
      [](const Array& p, const std::filesystem::path& model_path, double coverage) {
        const model::Checkpoint ck = model::load_model(model_path);
        PointCloud in;
        in.points = to_points(p);
        PointCloud out;
        {
          py::gil_scoped_release release;
          out = train::upsample_with_model(ck.params, ck.config, in, coverage);
        }
        return cloud_tuple(out);
      },
      py::arg("points"), py::arg("model_path"), py::arg("coverage") = 3.0,
      "Upsamples with a saved checkpoint; returns (points, normals).");
}
