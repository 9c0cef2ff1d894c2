#pragma once

#include <string>

#include "tagnav/drone_sim.hpp"

namespace tagnav {

/// Everything a world file describes: tag layout, noise, detection limits,
/// the drone's start pose, its camera and the RNG seed.
struct WorldFile {
  WorldModel world;
  SimConfig sim;
};

/// Parses the JSON world format:
///
///   {"tags": [{"id": 0, "size_m": 0.184, "position": [x, y, z],
///              "yaw_deg": 0, "pitch_deg": 0, "roll_deg": 0}],
///    "noise": {"corner_px": 0.5, "proportional": 0, "additive_m": 0,
///              "turn_deg": 0, "rangefinder": false},
///    "detection": {"max_range_m": 10, "max_view_angle_deg": 80.2},
///    "start": {"position": [0, 0, 0], "yaw_deg": 0},
///    "camera": {"sensor": {"focal_mm": 4, "width_mm": 4, "height_mm": 3,
///                          "resolution": [960, 720]},
///               "distortion": [k1, k2, p1, p2]},
///    "seed": 7}
///
/// Every section is optional; `camera` may instead carry explicit
/// `intrinsics` {image_width, image_height, cx, cy, fx, fy}.
WorldFile parse_world_json(const std::string& text);
WorldFile load_world(const std::string& path);
std::string world_to_json(const WorldFile& wf);

}  // namespace tagnav
