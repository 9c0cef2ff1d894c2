#include "tagnav/world_io.hpp"

#include <fstream>
#include <json.hpp>
#include <numbers>
#include <sstream>

#include "tagnav/error.hpp"

namespace tagnav {
namespace {

using nlohmann::json;

constexpr double kDeg = std::numbers::pi / 180.0;

Eigen::Vector3d vec3(const json& j, const char* what) {
  if (!j.is_array() || j.size() != 3) throw FormatError(std::string(what) + " must be a 3-element array");
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

CameraIntrinsics parse_camera(const json& j) {
  Distortion d;
  if (j.contains("distortion")) {
    const auto& a = j.at("distortion");
    if (!a.is_array() || a.size() != 4) throw FormatError("camera.distortion must be [k1, k2, p1, p2]");
    d = {a[0].get<double>(), a[1].get<double>(), a[2].get<double>(), a[3].get<double>()};
  }
  if (j.contains("intrinsics")) {
    const auto& k = j.at("intrinsics");
    CameraIntrinsics K;
    K.width = k.at("image_width").get<int>();
    K.height = k.at("image_height").get<int>();
    const PixelPoint c = default_principal_point(K.width, K.height);
    K.cx = k.value("cx", c.u);
    K.cy = k.value("cy", c.v);
    K.fx = k.at("fx").get<double>();
    K.fy = k.at("fy").get<double>();
    K.distortion = d;
    K.validate();
    return K;
  }
  SensorSpec spec = default_tello_sensor();
  if (j.contains("sensor")) {
    const auto& s = j.at("sensor");
    spec.focal_length_mm = s.value("focal_mm", spec.focal_length_mm);
    spec.sensor_width_mm = s.value("width_mm", spec.sensor_width_mm);
    spec.sensor_height_mm = s.value("height_mm", spec.sensor_height_mm);
    if (s.contains("resolution")) {
      spec.width_px = s.at("resolution").at(0).get<int>();
      spec.height_px = s.at("resolution").at(1).get<int>();
    }
  }
  return intrinsics_from_sensor(spec, d);
}

}  // namespace

WorldFile parse_world_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw FormatError(std::string("world file is not valid JSON: ") + e.what());
  }
  try {
    WorldFile wf;
    for (const auto& t : j.value("tags", json::array())) {
      TagSpec tag;
      tag.id = t.at("id").get<int>();
      tag.size_m = t.value("size_m", 0.184);
      tag.position = vec3(t.at("position"), "tag position");
      tag.yaw_rad = t.value("yaw_deg", 0.0) * kDeg;
      tag.pitch_rad = t.value("pitch_deg", 0.0) * kDeg;
      tag.roll_rad = t.value("roll_deg", 0.0) * kDeg;
      wf.world.tags.push_back(tag);
    }
    if (j.contains("noise")) {
      const auto& n = j.at("noise");
      wf.world.corner_noise_px_sigma = n.value("corner_px", wf.world.corner_noise_px_sigma);
      wf.world.actuation.proportional_sigma = n.value("proportional", 0.0);
      wf.world.actuation.additive_sigma_m = n.value("additive_m", 0.0);
      wf.world.actuation.turn_sigma_rad = n.value("turn_deg", 0.0) * kDeg;
      wf.world.rangefinder_noise = n.value("rangefinder", false);
    }
    if (j.contains("detection")) {
      const auto& d = j.at("detection");
      wf.world.detect_max_range_m = d.value("max_range_m", wf.world.detect_max_range_m);
      if (d.contains("max_view_angle_deg")) {
        wf.world.detect_max_view_angle_rad = d.at("max_view_angle_deg").get<double>() * kDeg;
      }
    }
    if (j.contains("start")) {
      const auto& s = j.at("start");
      if (s.contains("position")) wf.world.start_position = vec3(s.at("position"), "start position");
      wf.world.start_yaw_rad = s.value("yaw_deg", 0.0) * kDeg;
    }
    if (j.contains("camera")) wf.sim.camera = parse_camera(j.at("camera"));
    wf.sim.rng_seed = j.value("seed", std::uint64_t{0});
    wf.world.validate();
    wf.sim.validate();
    return wf;
  } catch (const json::exception& e) {
    throw FormatError(std::string("bad world file: ") + e.what());
  }
}

WorldFile load_world(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open world file " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_world_json(ss.str());
}

std::string world_to_json(const WorldFile& wf) {
  json j;
  j["tags"] = json::array();
  for (const auto& t : wf.world.tags) {
    j["tags"].push_back({{"id", t.id},
                         {"size_m", t.size_m},
                         {"position", {t.position.x(), t.position.y(), t.position.z()}},
                         {"yaw_deg", t.yaw_rad / kDeg},
                         {"pitch_deg", t.pitch_rad / kDeg},
                         {"roll_deg", t.roll_rad / kDeg}});
  }
  j["noise"] = {{"corner_px", wf.world.corner_noise_px_sigma},
                {"proportional", wf.world.actuation.proportional_sigma},
                {"additive_m", wf.world.actuation.additive_sigma_m},
                {"turn_deg", wf.world.actuation.turn_sigma_rad / kDeg},
                {"rangefinder", wf.world.rangefinder_noise}};
  j["detection"] = {{"max_range_m", wf.world.detect_max_range_m},
                    {"max_view_angle_deg", wf.world.detect_max_view_angle_rad / kDeg}};
  const auto& p = wf.world.start_position;
  j["start"] = {{"position", {p.x(), p.y(), p.z()}}, {"yaw_deg", wf.world.start_yaw_rad / kDeg}};
  const auto& K = wf.sim.camera;
  j["camera"] = {{"intrinsics",
                  {{"image_width", K.width},
                   {"image_height", K.height},
                   {"cx", K.cx},
                   {"cy", K.cy},
                   {"fx", K.fx},
                   {"fy", K.fy}}},
                 {"distortion", {K.distortion.k1, K.distortion.k2, K.distortion.p1, K.distortion.p2}}};
  j["seed"] = wf.sim.rng_seed;
  return j.dump(2);
}

}  // namespace tagnav
