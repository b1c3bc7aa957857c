#include <pybind11/eigen.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "mvfusion/config.hpp"
#include "mvfusion/dataset_io.hpp"
#include "mvfusion/errors.hpp"
#include "mvfusion/evaluation.hpp"
#include "mvfusion/pipeline.hpp"
#include "mvfusion/runner.hpp"
#include "mvfusion/synth.hpp"
#include "mvfusion/tracking.hpp"

namespace py = pybind11;
using namespace mvfusion;

namespace {

using DepthArray = py::array_t<double, py::array::c_style | py::array::forcecast>;
using Array = DepthArray;

DepthFrame to_frame(const DepthArray& a) {
  if (a.ndim() != 2) throw std::invalid_argument("depth must be a 2-D array (height, width)");
  const auto h = static_cast<int>(a.shape(0));
  const auto w = static_cast<int>(a.shape(1));
  std::vector<double> data(a.data(), a.data() + a.size());
  return {w, h, std::move(data)};
}

DepthArray to_array(const DepthFrame& f) {
  DepthArray out({f.height(), f.width()});
  std::copy(f.data().begin(), f.data().end(), out.mutable_data());
  return out;
}

py::tuple cloud_arrays(const PointCloud& c) {
  py::array_t<double> v({static_cast<py::ssize_t>(c.size()), py::ssize_t{3}});
  py::array_t<double> n({static_cast<py::ssize_t>(c.size()), py::ssize_t{3}});
  auto vm = v.mutable_unchecked<2>();
  auto nm = n.mutable_unchecked<2>();
  for (std::size_t i = 0; i < c.size(); ++i)
    for (int a = 0; a < 3; ++a) {
      vm(i, a) = c.vertices[i][a];
      nm(i, a) = c.normals[i][a];
    }
  return py::make_tuple(v, n);
}

PointCloud cloud_from(const Array& v, const Array& n) {
  if (v.ndim() != 2 || v.shape(1) != 3 || n.ndim() != 2 || n.shape(1) != 3 || v.shape(0) != n.shape(0))
    throw std::invalid_argument("vertices and normals must both be (N, 3) arrays");
  PointCloud c;
  auto vr = v.unchecked<2>();
  auto nr = n.unchecked<2>();
  for (py::ssize_t i = 0; i < v.shape(0); ++i) {
    c.vertices.emplace_back(vr(i, 0), vr(i, 1), vr(i, 2));
    c.normals.emplace_back(nr(i, 0), nr(i, 1), nr(i, 2));
  }
  return c;
}

}  // namespace

PYBIND11_MODULE(_mvfusion, m) {
  m.doc() = "Multi-volume TSDF depth fusion";

  py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
  py::register_exception<FormatError>(m, "FormatError", PyExc_ValueError);
  py::register_exception<LoadError>(m, "LoadError", PyExc_OSError);
  py::register_exception<EmptyInputError>(m, "EmptyInputError", PyExc_ValueError);
  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<TrackingLostError>(m, "TrackingLostError", PyExc_RuntimeError);

  py::class_<CameraIntrinsics>(m, "CameraIntrinsics")
      .def(py::init<>())
      .def(py::init([](double fx, double fy, double cx, double cy, int w, int h) {
             CameraIntrinsics c{fx, fy, cx, cy, w, h};
             c.validate();
             return c;
           }),
           py::arg("fx"), py::arg("fy"), py::arg("cx"), py::arg("cy"), py::arg("width"), py::arg("height"))
      .def_readwrite("fx", &CameraIntrinsics::fx)
      .def_readwrite("fy", &CameraIntrinsics::fy)
      .def_readwrite("cx", &CameraIntrinsics::cx)
      .def_readwrite("cy", &CameraIntrinsics::cy)
      .def_readwrite("width", &CameraIntrinsics::width)
      .def_readwrite("height", &CameraIntrinsics::height)
      .def("scaled_down", &CameraIntrinsics::scaled_down);

  py::class_<Pose>(m, "Pose")
      .def(py::init<>())
      .def(py::init<const Matrix3d&, const Vector3d&>(), py::arg("rotation"), py::arg("translation"))
      .def_static("from_axis_angle", &Pose::from_axis_angle, py::arg("axis"), py::arg("angle"),
                  py::arg("translation") = Vector3d::Zero())
      .def_property_readonly("rotation", &Pose::rotation)
      .def_property_readonly("translation", &Pose::translation)
      .def("apply", &Pose::apply)
      .def("inverse", &Pose::inverse)
      .def("rotation_angle", &Pose::rotation_angle)
      .def("__mul__", &Pose::operator*)
      .def("matrix", [](const Pose& p) {
        Eigen::Matrix4d t = Eigen::Matrix4d::Identity();
        t.topLeftCorner<3, 3>() = p.rotation();
        t.topRightCorner<3, 1>() = p.translation();
        return t;
      });

  py::class_<Scene>(m, "Scene")
      .def(py::init<>())
      .def_static("preset", [](const std::string& name) { return Scene::preset(name); })
      .def_static("parse", [](const std::string& text) { return Scene::parse(text); })
      .def("to_text", &Scene::to_text)
      .def("signed_distance", &Scene::signed_distance)
      .def("surface_distance", &Scene::surface_distance)
      .def("add_sphere", [](Scene& s, const Vector3d& c, double r) { s.add(Sphere{c, r}); })
      .def("add_plane", [](Scene& s, const Vector3d& p, const Vector3d& n) { s.add(Plane{p, n}); })
      .def("add_box", [](Scene& s, const Vector3d& lo, const Vector3d& hi) { s.add(Box{lo, hi}); });

  py::class_<NoiseModel>(m, "NoiseModel")
      .def(py::init([](double sigma0, double sigma1, double dropout, std::uint64_t seed) {
             NoiseModel n{sigma0, sigma1, dropout, seed};
             n.validate();
             return n;
           }),
           py::arg("sigma0") = 0.0, py::arg("sigma1") = 0.0, py::arg("dropout") = 0.0, py::arg("seed") = 0)
      .def_readwrite("sigma0", &NoiseModel::sigma0)
      .def_readwrite("sigma1", &NoiseModel::sigma1)
      .def_readwrite("dropout", &NoiseModel::dropout)
      .def_readwrite("seed", &NoiseModel::seed);

  m.def("render_depth",
        [](const Scene& s, const Pose& p, const CameraIntrinsics& c, double max_depth) {
          return to_array(render_depth(s, p, c, max_depth));
        },
        py::arg("scene"), py::arg("pose"), py::arg("intrinsics"),
        py::arg("max_depth") = std::numeric_limits<double>::infinity());
  m.def("add_noise", [](const DepthArray& d, const NoiseModel& n) { return to_array(add_noise(to_frame(d), n)); });
  m.def("orbit_trajectory", &orbit_trajectory, py::arg("center"), py::arg("radius"), py::arg("frames"));
  m.def("corridor_trajectory", &corridor_trajectory, py::arg("length"), py::arg("frames"));

  py::class_<ErrorStats>(m, "ErrorStats")
      .def_readonly("vertex_count", &ErrorStats::vertex_count)
      .def_readonly("mean", &ErrorStats::mean)
      .def_readonly("median", &ErrorStats::median)
      .def_readonly("std", &ErrorStats::std);

  m.def("cloud_to_surface_stats",
        [](const Array& v, const Scene& s) {
          if (v.ndim() != 2 || v.shape(1) != 3) throw std::invalid_argument("vertices must be (N, 3)");
          PointCloud c;
          auto vr = v.unchecked<2>();
          for (py::ssize_t i = 0; i < v.shape(0); ++i) c.vertices.emplace_back(vr(i, 0), vr(i, 1), vr(i, 2));
          c.normals.resize(c.vertices.size(), Vector3d::Zero());
          return cloud_to_surface_stats(c, s);
        },
        py::arg("vertices"), py::arg("scene"));

  m.def("icp_align",
        [](const DepthArray& reference, const Pose& reference_pose, const DepthArray& current,
           const CameraIntrinsics& c) {
          const auto ref = transform_map(reference_pose, convert_depth(c, to_frame(reference)));
          const auto cur = convert_depth(c, to_frame(current));
          IcpResult r = icp_track(ref, cur, reference_pose, c);
          return py::make_tuple(r.pose, std::string(to_string(r.status)), r.correspondences);
        },
        py::arg("reference"), py::arg("reference_pose"), py::arg("current"), py::arg("intrinsics"),
        "Aligns `current` against a reference frame; returns (pose, status, correspondences).");

  py::class_<FusionPipeline>(m, "FusionPipeline")
      .def(py::init([](const std::string& config_text) {
             return std::make_unique<FusionPipeline>(parse_config(config_text).pipeline_options());
           }),
           py::arg("config") = "", "Pipeline built from config text (key = value lines).")
      .def("process",
           [](FusionPipeline& p, const DepthArray& d, std::optional<Pose> pose) {
             const FrameReport& r = p.process(to_frame(d), pose);
             py::dict out;
             out["frame"] = r.frame;
             out["pose"] = r.pose;
             out["status"] = std::string(to_string(r.status));
             out["live_count"] = r.live_count;
             out["resident_count"] = r.resident_count;
             out["uploads"] = r.transfers.uploads;
             out["downloads"] = r.transfers.downloads;
             out["raymap_valid"] = r.raymap_valid;
             return out;
           },
           py::arg("depth"), py::arg("pose") = std::nullopt)
      .def("raymap_depth",
           [](const FusionPipeline& p) {
             const RayMap& r = p.raymap();
             DepthArray out({r.height, r.width});
             std::copy(r.distance.begin(), r.distance.end(), out.mutable_data());
             return out;
           })
      .def("finish", [](const FusionPipeline& p) { return cloud_arrays(p.finish()); })
      .def_property_readonly("voxel_size", &FusionPipeline::voxel_size)
      .def_property_readonly("live_count", [](const FusionPipeline& p) { return p.volumes().size(); });

  m.def("run",
        [](const std::string& config_text, const std::string& out_dir) {
          RunConfig cfg = parse_config(config_text);
          if (!out_dir.empty()) apply_overrides(cfg, {"output.dir=" + out_dir});
          RunResult res = run_pipeline(cfg);
          py::dict d;
          if (!out_dir.empty()) d["ply"] = write_run_outputs(cfg, res);
          d["vertices"] = res.cloud.size();
          d["lost_frames"] = res.lost_frames;
          d["config_hash"] = res.config_hash;
          if (res.stats) d["stats"] = *res.stats;
          return d;
        },
        py::arg("config") = "", py::arg("out_dir") = "");

  m.def("equivalence_check",
        [](const Scene& s, const std::vector<Pose>& traj, const CameraIntrinsics& c, double l, int r,
           int r_gpu) {
          EquivalenceReport rep = equivalence_check(s, traj, c, l, r, r_gpu);
          py::dict d;
          d["max_raymap_diff"] = rep.max_raymap_diff;
          d["max_tsdf_diff"] = rep.max_tsdf_diff;
          d["validity_mismatches"] = rep.validity_mismatches;
          d["compared_pixels"] = rep.compared_pixels;
          d["overlap_voxels"] = rep.overlap_voxels;
          return d;
        },
        py::arg("scene"), py::arg("trajectory"), py::arg("intrinsics"), py::arg("l"), py::arg("r"),
        py::arg("r_gpu"));

  m.def("fit_line", [](const std::vector<double>& x, const std::vector<double>& y) {
    LinearFit f = fit_line(x, y);
    return py::make_tuple(f.slope, f.intercept, f.r2);
  });

  m.def("write_ply", [](const std::filesystem::path& path, const Array& v,
                        const Array& n) { write_ply(path, cloud_from(v, n)); });
  m.def("read_ply", [](const std::filesystem::path& path) { return cloud_arrays(read_ply(path)); });
  m.def("read_depth_png", [](const std::filesystem::path& path, double scale) {
    return to_array(read_depth_png(path, scale));
  }, py::arg("path"), py::arg("depth_scale") = kDefaultDepthScale);
  m.def("write_depth_png", [](const std::filesystem::path& path, const DepthArray& d, double scale) {
    write_depth_png(path, to_frame(d), scale);
  }, py::arg("path"), py::arg("depth"), py::arg("depth_scale") = kDefaultDepthScale);
  m.def("load_sequence",
        [](const std::filesystem::path& dir, double scale) {
          py::list out;
          for (LoadedFrame& f : load_sequence(dir, scale))
            out.append(py::make_tuple(f.timestamp, to_array(f.depth), f.groundtruth));
          return out;
        },
        py::arg("dir"), py::arg("depth_scale") = kDefaultDepthScale);
}
