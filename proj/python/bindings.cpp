#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "tagnav/camera_model.hpp"
#include "tagnav/drone_link.hpp"
#include "tagnav/error.hpp"
#include "tagnav/error_analysis.hpp"
#include "tagnav/frame_transforms.hpp"
#include "tagnav/mission_controller.hpp"
#include "tagnav/mission_runner.hpp"
#include "tagnav/observation.hpp"
#include "tagnav/tag_pose.hpp"
#include "tagnav/world_io.hpp"

namespace py = pybind11;
using namespace tagnav;

namespace {

WorldFile load_with_overrides(const std::string& path, std::optional<double> sigma, std::optional<std::uint64_t> seed) {
  WorldFile wf = load_world(path);
  if (sigma) wf.world.corner_noise_px_sigma = *sigma;
  if (seed) wf.sim.rng_seed = *seed;
  return wf;
}

MissionLog fly(const std::string& world_path, const MissionConfig& cfg, std::optional<std::uint64_t> seed) {
  cfg.validate();
  const WorldFile wf = load_with_overrides(world_path, std::nullopt, seed);
  Simulator sim(wf.world, wf.sim);
  link::LinkServer server(sim);
  link::LoopbackTransport transport(server);
  link::LinkClient client(transport);
  SimDetector detector(server);
  SimClock clock(server);
  MissionRunner runner(cfg, client, detector, clock, sim_pose_probe(server));
  return runner.run();
}

}  // namespace

PYBIND11_MODULE(_tagnav, m) {
  m.doc() = "Marker-based indoor drone positioning core";

  auto error = py::register_exception<Error>(m, "TagnavError", PyExc_RuntimeError);
  py::register_exception<InvalidArgument>(m, "InvalidArgument", error.ptr());
  auto numerical = py::register_exception<NumericalFailure>(m, "NumericalFailure", error.ptr());
  py::register_exception<RankDeficiency>(m, "RankDeficiency", numerical.ptr());
  py::register_exception<BehindCamera>(m, "BehindCamera", error.ptr());
  py::register_exception<UndefinedAngle>(m, "UndefinedAngle", error.ptr());
  py::register_exception<ParseError>(m, "ParseError", error.ptr());
  py::register_exception<FormatError>(m, "FormatError", error.ptr());
  py::register_exception<NoPlan>(m, "NoPlan", error.ptr());
  py::register_exception<LinkDown>(m, "LinkDown", error.ptr());

  py::class_<PixelPoint>(m, "PixelPoint")
      .def(py::init<>())
      .def(py::init([](double u, double v) { return PixelPoint{u, v}; }), py::arg("u"), py::arg("v"))
      .def_readwrite("u", &PixelPoint::u)
      .def_readwrite("v", &PixelPoint::v)
      .def("__eq__", [](const PixelPoint& a, const PixelPoint& b) { return a == b; })
      .def("__repr__", [](const PixelPoint& p) {
        std::ostringstream s;
        s << "PixelPoint(" << p.u << ", " << p.v << ")";
        return s.str();
      });

  py::class_<Distortion>(m, "Distortion")
      .def(py::init([](double k1, double k2, double p1, double p2) { return Distortion{k1, k2, p1, p2}; }),
           py::arg("k1") = 0.0, py::arg("k2") = 0.0, py::arg("p1") = 0.0, py::arg("p2") = 0.0)
      .def_readwrite("k1", &Distortion::k1)
      .def_readwrite("k2", &Distortion::k2)
      .def_readwrite("p1", &Distortion::p1)
      .def_readwrite("p2", &Distortion::p2);

  py::class_<SensorSpec>(m, "SensorSpec")
      .def(py::init([](double f_mm, double w_mm, double h_mm, int w_px, int h_px) {
             return SensorSpec{f_mm, w_mm, h_mm, w_px, h_px};
           }),
           py::arg("focal_length_mm"), py::arg("sensor_width_mm"), py::arg("sensor_height_mm"), py::arg("width_px"),
           py::arg("height_px"))
      .def_readwrite("focal_length_mm", &SensorSpec::focal_length_mm)
      .def_readwrite("sensor_width_mm", &SensorSpec::sensor_width_mm)
      .def_readwrite("sensor_height_mm", &SensorSpec::sensor_height_mm)
      .def_readwrite("width_px", &SensorSpec::width_px)
      .def_readwrite("height_px", &SensorSpec::height_px);

  py::class_<CameraIntrinsics>(m, "CameraIntrinsics")
      .def(py::init<>())
      .def_readwrite("width", &CameraIntrinsics::width)
      .def_readwrite("height", &CameraIntrinsics::height)
      .def_readwrite("cx", &CameraIntrinsics::cx)
      .def_readwrite("cy", &CameraIntrinsics::cy)
      .def_readwrite("fx", &CameraIntrinsics::fx)
      .def_readwrite("fy", &CameraIntrinsics::fy)
      .def_readwrite("distortion", &CameraIntrinsics::distortion)
      .def("validate", &CameraIntrinsics::validate)
      .def("matrix", &CameraIntrinsics::matrix);

  m.def("focal_from_sensor", &focal_from_sensor, py::arg("spec"));
  m.def("default_principal_point", &default_principal_point, py::arg("width"), py::arg("height"));
  m.def("intrinsics_from_sensor", &intrinsics_from_sensor, py::arg("spec"), py::arg("distortion") = Distortion{});
  m.def("default_tello_intrinsics", &default_tello_intrinsics);
  m.def("load_intrinsics", &load_intrinsics, py::arg("path"));
  m.def("save_intrinsics", &save_intrinsics, py::arg("path"), py::arg("intrinsics"));
  m.def("project", &project, py::arg("point"), py::arg("intrinsics"),
        "Camera-frame point (right, down, forward) to a distorted pixel.");
  m.def("undistort_point", &undistort_point, py::arg("pixel"), py::arg("intrinsics"));

  py::class_<TagObservation>(m, "TagObservation")
      .def(py::init([](int id, const std::array<PixelPoint, 4>& corners) { return TagObservation{id, corners}; }),
           py::arg("tag_id"), py::arg("corners"))
      .def_readwrite("tag_id", &TagObservation::tag_id)
      .def_readwrite("corners", &TagObservation::corners)
      .def("quad_area", &TagObservation::quad_area)
      .def("validate", &TagObservation::validate);

  m.def("parse_observation_line", &parse_observation_line, py::arg("line"));
  m.def("format_observation_line", &format_observation_line, py::arg("observation"));
  m.def("undistort_observation", &undistort_observation, py::arg("observation"), py::arg("intrinsics"));

  py::class_<TagPose>(m, "TagPose")
      .def(py::init<>())
      .def(py::init([](const Eigen::Matrix3d& r, const Eigen::Vector3d& t) { return TagPose{r, t}; }),
           py::arg("rotation"), py::arg("translation"))
      .def_readwrite("rotation", &TagPose::rotation)
      .def_readwrite("translation", &TagPose::translation)
      .def("validate", &TagPose::validate);

  m.def("tag_corners_3d", &tag_corners_3d, py::arg("tag_size"));
  m.def("estimate_tag_pose", &estimate_tag_pose, py::arg("observation"), py::arg("intrinsics"), py::arg("tag_size"),
        "Undistort, fit a homography, decompose and refine.");
  m.def("predict_corners", &predict_corners, py::arg("pose"), py::arg("intrinsics"), py::arg("tag_size"));
  m.def("reprojection_error_rms", &reprojection_error_rms, py::arg("pose"), py::arg("observation"),
        py::arg("intrinsics"), py::arg("tag_size"));
  m.def("tag_facing_direction", &tag_facing_direction, py::arg("pose"));

  m.def(
      "camera_to_drone",
      [](const Eigen::Vector3d& v) { return camera_to_drone(CameraVector::from(v)).vec(); }, py::arg("v"),
      "(right, down, forward) to (forward, right, down).");
  m.def(
      "drone_to_camera", [](const Eigen::Vector3d& v) { return drone_to_camera({v.x(), v.y(), v.z()}).vec(); },
      py::arg("v"));
  m.def("angle_between", &angle_between, py::arg("a"), py::arg("b"));
  m.def("signed_turn_to_face", &signed_turn_to_face, py::arg("camera_forward"), py::arg("tag_facing"));
  m.def("normalize_angle", &normalize_angle, py::arg("angle"));

  py::class_<ErrorRecord>(m, "ErrorRecord")
      .def(py::init<>())
      .def_readwrite("ref_distance_m", &ErrorRecord::ref_distance_m)
      .def_readwrite("est_distance_m", &ErrorRecord::est_distance_m)
      .def_readwrite("abs_error_m", &ErrorRecord::abs_error_m)
      .def_readwrite("rel_error", &ErrorRecord::rel_error)
      .def_readwrite("yaw_offset_rad", &ErrorRecord::yaw_offset_rad)
      .def_readwrite("regression_flag", &ErrorRecord::regression_flag)
      .def_readwrite("trial", &ErrorRecord::trial);

  py::class_<Correlation>(m, "Correlation")
      .def_readonly("r", &Correlation::r)
      .def_readonly("degenerate", &Correlation::degenerate);

  m.def("distance_estimate", &distance_estimate, py::arg("translation"));
  m.def(
      "errors",
      [](double est, double ref) {
        const auto e = errors(est, ref);
        return py::make_tuple(e.abs, e.rel);
      },
      py::arg("est"), py::arg("ref"), "Returns (absolute, relative) error.");
  m.def("pearson", &pearson, py::arg("xs"), py::arg("ys"));
  m.def("spearman", &spearman, py::arg("xs"), py::arg("ys"));
  m.def("median", &median, py::arg("values"));
  m.def("percentile", &percentile, py::arg("values"), py::arg("q"));

  m.def(
      "range_sweep",
      [](const std::string& world, int trials, std::uint64_t seed, std::optional<double> sigma,
         std::optional<std::vector<double>> distances) {
        const WorldFile wf = load_with_overrides(world, sigma, std::nullopt);
        RangeSweepConfig cfg;
        cfg.trials_per_point = trials;
        cfg.seed = seed;
        if (distances) cfg.distances_m = *distances;
        py::gil_scoped_release release;
        return range_sweep(wf.world, wf.sim.camera, cfg).records;
      },
      py::arg("world"), py::arg("trials") = 1, py::arg("seed") = 0, py::arg("sigma") = py::none(),
      py::arg("distances") = py::none());
  m.def(
      "yaw_sweep",
      [](const std::string& world, const std::vector<double>& offsets_rad, double distance, int trials,
         std::uint64_t seed, std::optional<double> sigma) {
        const WorldFile wf = load_with_overrides(world, sigma, std::nullopt);
        YawSweepConfig cfg;
        cfg.offsets_rad = offsets_rad;
        cfg.distance_m = distance;
        cfg.trials = trials;
        cfg.seed = seed;
        py::gil_scoped_release release;
        const auto res = yaw_sweep(wf.world, wf.sim.camera, cfg);
        return std::make_pair(res.records, res.correlation);
      },
      py::arg("world"), py::arg("offsets_rad"), py::arg("distance") = 3.0, py::arg("trials") = 1,
      py::arg("seed") = 0, py::arg("sigma") = py::none(), "Returns (records, correlation of |offset| with error).");
  m.def("sweep_report", &sweep_report, py::arg("records"), py::arg("bin_width") = 1.0);
  m.def(
      "sweep_csv",
      [](const std::vector<ErrorRecord>& records) {
        std::ostringstream out;
        write_csv(out, records);
        return out.str();
      },
      py::arg("records"));

  py::enum_<Phase>(m, "Phase")
      .value("Idle", Phase::Idle)
      .value("TakingOff", Phase::TakingOff)
      .value("Sensing", Phase::Sensing)
      .value("Aligning", Phase::Aligning)
      .value("Moving", Phase::Moving)
      .value("Returning", Phase::Returning)
      .value("Searching", Phase::Searching)
      .value("Climbing", Phase::Climbing)
      .value("Landing", Phase::Landing)
      .value("Landed", Phase::Landed)
      .value("Aborted", Phase::Aborted);

  py::class_<MissionConfig>(m, "MissionConfig")
      .def(py::init<>())
      .def_readwrite("tag_size_m", &MissionConfig::tag_size_m)
      .def_readwrite("standoff_m", &MissionConfig::standoff_m)
      .def_readwrite("takeoff_height_m", &MissionConfig::takeoff_height_m)
      .def_readwrite("altitude_step_m", &MissionConfig::altitude_step_m)
      .def_readwrite("max_altitude_m", &MissionConfig::max_altitude_m)
      .def_readwrite("search_turn_rad", &MissionConfig::search_turn_rad)
      .def_readwrite("min_move_m", &MissionConfig::min_move_m)
      .def_readwrite("max_move_m", &MissionConfig::max_move_m)
      .def_readwrite("battery_floor_pct", &MissionConfig::battery_floor_pct)
      .def("validate", &MissionConfig::validate)
      .def("altitude_levels", &MissionConfig::altitude_levels);

  py::class_<DronePose>(m, "DronePose")
      .def_readonly("x", &DronePose::x)
      .def_readonly("y", &DronePose::y)
      .def_readonly("z", &DronePose::z)
      .def_readonly("yaw", &DronePose::yaw);

  py::class_<MissionLog>(m, "MissionLog")
      .def_readonly("final_phase", &MissionLog::final_phase)
      .def_readonly("end_reason", &MissionLog::end_reason)
      .def_readonly("approaches", &MissionLog::approaches)
      .def_readonly("hovers", &MissionLog::hovers)
      .def_property_readonly("commands",
                             [](const MissionLog& log) {
                               std::vector<std::string> out;
                               for (const auto& c : log.commands) out.push_back(link::encode(c));
                               return out;
                             })
      .def("to_jsonl", &MissionLog::to_jsonl);

  m.def(
      "run_mission",
      [](const std::string& world, const MissionConfig& cfg, std::optional<std::uint64_t> seed) {
        py::gil_scoped_release release;
        return fly(world, cfg, seed);
      },
      py::arg("world"), py::arg("config") = MissionConfig{}, py::arg("seed") = py::none(),
      "Fly one mission against the simulator over the loopback link.");

  m.def(
      "normalize_command", [](const std::string& line) { return link::encode(link::parse(line)); }, py::arg("line"),
      "Parse a link command and encode it back.");
  m.def(
      "go_command",
      [](const Eigen::Vector3d& move) -> std::optional<std::string> {
        const auto c = link::go_from_meters({move.x(), move.y(), move.z()});
        if (!c) return std::nullopt;
        return link::encode(*c);
      },
      py::arg("move"), "Body-frame (forward, right, down) metres to a go command, or None below 1 cm.");
  m.def(
      "turn_command",
      [](double theta_cw) -> std::optional<std::string> {
        const auto c = link::turn_from_radians(theta_cw);
        if (!c) return std::nullopt;
        return link::encode(*c);
      },
      py::arg("theta_cw"));
}
