// Python bindings. Point sets cross the boundary as (N, 3) float64 arrays.

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "radvote/config.hpp"
#include "radvote/data_io.hpp"
#include "radvote/error.hpp"
#include "radvote/experiments.hpp"
#include "radvote/selftest.hpp"

namespace py = pybind11;
using namespace radvote;

namespace {

using Points = Eigen::Matrix<double, Eigen::Dynamic, 3, Eigen::RowMajor>;

std::vector<Point3> to_points(const Eigen::Ref<const Points>& m) {
  std::vector<Point3> out(static_cast<std::size_t>(m.rows()));
  for (Eigen::Index i = 0; i < m.rows(); ++i) out[static_cast<std::size_t>(i)] = m.row(i).transpose();
  return out;
}

Points to_array(const std::vector<Point3>& pts) {
  Points m(static_cast<Eigen::Index>(pts.size()), 3);
  for (std::size_t i = 0; i < pts.size(); ++i) m.row(static_cast<Eigen::Index>(i)) = pts[i].transpose();
  return m;
}

PointCloud to_cloud(const Eigen::Ref<const Points>& m) {
  PointCloud c;
  c.points = to_points(m);
  return c;
}

RigidTransform to_transform(const Eigen::Matrix3d& r, const Eigen::Vector3d& t) {
  RigidTransform out;
  out.rotation = r;
  out.translation = t;
  return out;
}

GridGeometry make_grid(const Eigen::Vector3d& origin, double resolution, std::array<int, 3> dims) {
  GridGeometry g;
  g.origin = origin;
  g.resolution = resolution;
  g.dims = dims;
  return g;
}

std::vector<std::size_t> collect(const std::function<std::size_t(const VoxelVisitor&)>& f) {
  std::vector<std::size_t> out;
  f([&](std::size_t i) { out.push_back(i); });
  return out;
}

py::dict csv_result(const ExperimentResult& r) {
  py::dict d;
  d["trials"] = format_csv(r.trials);
  d["summary"] = format_csv(r.summary);
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Keypoint voting: geometry, rasterizers, metrics and experiment drivers";

  py::register_exception<ParameterError>(m, "ParameterError", PyExc_ValueError);
  py::register_exception<IoError>(m, "IoError", PyExc_OSError);
  py::register_exception<NumericalError>(m, "NumericalError", PyExc_ArithmeticError);

  py::enum_<Scheme>(m, "Scheme")
      .value("OFFSET", Scheme::Offset)
      .value("VECTOR", Scheme::Vector)
      .value("POLAR", Scheme::Polar)
      .value("RADIAL", Scheme::Radial);

  py::enum_<SphereRule>(m, "SphereRule")
      .value("SHELL", SphereRule::Shell)
      .value("ANDRES_SLICES", SphereRule::AndresSlices)
      .value("SUPERCOVER", SphereRule::Supercover);

  m.def(
      "scheme_value",
      [](Scheme s, const Eigen::Vector3d& point, const Eigen::Vector3d& keypoint) {
        const SchemeValue v = compute_scheme_value(s, point, keypoint);
        return std::vector<double>(v.c.begin(), v.c.begin() + v.depth);
      },
      py::arg("scheme"), py::arg("point"), py::arg("keypoint"));

  m.def(
      "backproject",
      [](int u, int v, double depth, double fx, double fy, double cx, double cy) {
        const CameraIntrinsics cam{fx, fy, cx, cy, 0, 0};  // image size plays no part in back-projection
        return Eigen::Vector3d(backproject({u, v, depth}, cam));
      },
      py::arg("u"), py::arg("v"), py::arg("depth"), py::arg("fx"), py::arg("fy"), py::arg("cx"), py::arg("cy"));

  m.def(
      "horn_solve",
      [](const Eigen::Ref<const Points>& src, const Eigen::Ref<const Points>& dst) {
        const RigidTransform t = horn_solve(to_points(src), to_points(dst));
        return py::make_tuple(Eigen::Matrix3d(t.rotation), Eigen::Vector3d(t.translation));
      },
      py::arg("src"), py::arg("dst"), "Least-squares (R, t) with dst ~ R src + t.");

  m.def(
      "fps_keypoints",
      [](const Eigen::Ref<const Points>& cloud, std::size_t k) { return to_array(fps_keypoints(to_cloud(cloud), k).keypoints); },
      py::arg("cloud"), py::arg("k"));

  m.def(
      "bbox_keypoints",
      [](const Eigen::Ref<const Points>& cloud, double scale) {
        return to_array(bbox_keypoints(to_cloud(cloud), scale).keypoints);
      },
      py::arg("cloud"), py::arg("scale"));

  m.def(
      "sphere_voxels",
      [](const Eigen::Vector3d& origin, double resolution, std::array<int, 3> dims, const Eigen::Vector3d& centre,
         double radius, SphereRule rule) {
        SphereOptions o;
        o.rule = rule;
        const GridGeometry g = make_grid(origin, resolution, dims);
        return collect([&](const VoxelVisitor& v) { return for_each_sphere_voxel(g, centre, radius, o, v); });
      },
      py::arg("origin"), py::arg("resolution"), py::arg("dims"), py::arg("centre"), py::arg("radius"),
      py::arg("rule") = SphereRule::Shell, "Linear voxel indices (x fastest) of the rasterized sphere.");

  m.def(
      "ray_voxels",
      [](const Eigen::Vector3d& origin, double resolution, std::array<int, 3> dims, const Eigen::Vector3d& start,
         const Eigen::Vector3d& direction) {
        const GridGeometry g = make_grid(origin, resolution, dims);
        return collect([&](const VoxelVisitor& v) { return for_each_ray_voxel(g, start, direction, v); });
      },
      py::arg("origin"), py::arg("resolution"), py::arg("dims"), py::arg("start"), py::arg("direction"));

  m.def(
      "add_metric",
      [](const Eigen::Ref<const Points>& model, const Eigen::Matrix3d& r_gt, const Eigen::Vector3d& t_gt,
         const Eigen::Matrix3d& r_est, const Eigen::Vector3d& t_est) {
        return add_metric(to_cloud(model), to_transform(r_gt, t_gt), to_transform(r_est, t_est));
      },
      py::arg("model"), py::arg("r_gt"), py::arg("t_gt"), py::arg("r_est"), py::arg("t_est"));

  m.def(
      "adds_metric",
      [](const Eigen::Ref<const Points>& model, const Eigen::Matrix3d& r_gt, const Eigen::Vector3d& t_gt,
         const Eigen::Matrix3d& r_est, const Eigen::Vector3d& t_est) {
        return adds_metric(to_cloud(model), to_transform(r_gt, t_gt), to_transform(r_est, t_est));
      },
      py::arg("model"), py::arg("r_gt"), py::arg("t_gt"), py::arg("r_est"), py::arg("t_est"));

  m.def(
      "auc_metric", [](const std::vector<double>& d, double max_threshold) { return auc_metric(d, max_threshold); },
      py::arg("distances"), py::arg("max_threshold") = 100.0);

  m.def(
      "accuracy_at_threshold",
      [](const std::vector<double>& d, double radius, double fraction) { return accuracy_at_threshold(d, radius, fraction); },
      py::arg("distances"), py::arg("object_radius"), py::arg("fraction") = 0.10);

  m.def(
      "load_ply", [](const std::string& path, double units_to_mm) { return to_array(load_ply(path, units_to_mm).points); },
      py::arg("path"), py::arg("units_to_mm"));

  m.def(
      "run_experiment",
      [](const std::string& config_json) {
        const ExperimentSpec spec = parse_config(config_json);
        ExperimentResult r;
        {
          py::gil_scoped_release release;
          r = run_experiment(spec);
        }
        return csv_result(r);
      },
      py::arg("config_json"), "Runs a JSON-configured experiment; returns {'trials': csv, 'summary': csv}.");

  m.def(
      "selftest",
      [](double annulus_half_width, int instances, std::uint64_t seed) {
        SelftestOptions o{annulus_half_width, instances, seed};
        std::vector<py::tuple> out;
        for (const auto& s : run_selftest(o)) out.push_back(py::make_tuple(s.name, s.passed, s.detail));
        return out;
      },
      py::arg("annulus_half_width") = 0.5, py::arg("instances") = 25, py::arg("seed") = 0);

  m.attr("CALIBRATED_SIGMA") = NoiseModel::kCalibratedSigma;
  m.attr("CSV_HEADER") = std::string(kCsvHeader);
}
