#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <optional>
#include <random>
#include <vector>

#include "tagnav/camera_model.hpp"
#include "tagnav/frame_transforms.hpp"
#include "tagnav/observation.hpp"
#include "tagnav/tag_pose.hpp"

namespace tagnav {

// World frame: x, y horizontal, z up, metres. Yaw is measured clockwise
// (seen from above) from +x, so heading(yaw) = (cos yaw, -sin yaw, 0).

/// A tag placed in the world. `yaw` is the heading a viewer must face to
/// see the printed face squarely; pitch tips the tag about its own x axis
/// and roll spins it about its normal.
struct TagSpec {
  int id = 0;
  double size_m = 0.184;
  Eigen::Vector3d position = Eigen::Vector3d::Zero();
  double yaw_rad = 0.0;
  double pitch_rad = 0.0;
  double roll_rad = 0.0;

  /// Tag frame -> world frame.
  Eigen::Matrix3d world_rotation() const;
};

struct ActuationNoise {
  double proportional_sigma = 0.0;  ///< relative scale error per move
  double additive_sigma_m = 0.0;    ///< per-axis additive error per move
  double turn_sigma_rad = 0.0;

  friend bool operator==(const ActuationNoise&, const ActuationNoise&) = default;
};

struct WorldModel {
  std::vector<TagSpec> tags;
  double detect_max_range_m = 10.0;
  double detect_max_view_angle_rad = 1.4;
  double corner_noise_px_sigma = 0.5;
  ActuationNoise actuation{};
  bool rangefinder_noise = false;
  Eigen::Vector3d start_position = Eigen::Vector3d::Zero();
  double start_yaw_rad = 0.0;

  void validate() const;
  const TagSpec& tag(int id) const;
};

inline constexpr double kRangefinderPrecisionM = 0.0015;
inline constexpr double kMinAirborneAltitudeM = 0.05;
inline constexpr double kMaxFlightSpeedMps = 8.0;

struct SimConfig {
  std::uint64_t rng_seed = 0;
  double flight_time_s = 13.0 * 60.0;  ///< airborne time that drains a full battery
  double telemetry_rate_hz = 10.0;
  double takeoff_height_m = 0.8;
  double cruise_speed_mps = 1.0;
  double vertical_speed_mps = 0.5;
  double turn_rate_rad_s = 1.5707963267948966;
  CameraIntrinsics camera = default_tello_intrinsics();

  void validate() const;
};

struct DroneState {
  Eigen::Vector3d position = Eigen::Vector3d::Zero();
  double yaw = 0.0;
  bool airborne = false;
  double height_above_takeoff = 0.0;
  double battery_pct = 100.0;
  Eigen::Vector3d speed = Eigen::Vector3d::Zero();
  double time_s = 0.0;
  double ground_z = 0.0;
};

struct TelemetryFrame {
  double time_s = 0.0;
  double height_m = 0.0;
  double battery_pct = 100.0;
  Eigen::Vector3d speed = Eigen::Vector3d::Zero();
  double yaw_deg = 0.0;
  double pitch_deg = 0.0;
  double roll_deg = 0.0;
};

/// Camera -> world rotation for a drone at the given yaw. The camera looks
/// along the drone's forward axis with x to the right and y down.
Eigen::Matrix3d camera_to_world(double yaw);

/// Exact pose of a tag in the camera frame of a drone at (position, yaw).
TagPose camera_frame_tag_pose(const Eigen::Vector3d& camera_position, double yaw, const TagSpec& tag);

/// Kinematic stand-in for the drone: commands complete instantly and move
/// the simulated clock forward by their nominal duration.
///
/// Single writer; readers must synchronize externally (see LinkServer).
class Simulator {
 public:
  Simulator(WorldModel world, SimConfig config);

  const DroneState& state() const { return state_; }
  const WorldModel& world() const { return world_; }
  const SimConfig& config() const { return config_; }
  const CameraIntrinsics& camera() const { return config_.camera; }

  // Commands. Each throws SimError when it cannot be executed and returns
  // the simulated duration it took.
  double takeoff();
  double land();
  double move(const DroneVector& v);
  double turn(double theta_cw);
  void step_time(double dt);

  /// Snapshot from the drone camera. Invisible tags are omitted.
  std::vector<TagObservation> observe_tags();

  /// Distance from the camera to the tag centre, optionally perturbed
  /// within the rangefinder precision.
  double rangefinder(int tag_id);

  TelemetryFrame telemetry() const;

  /// Teleports the drone (used by sweeps to stage measurement positions).
  void place(const Eigen::Vector3d& position, double yaw, bool airborne = true);

  void reseed(std::uint64_t seed) { rng_.seed(seed); }

 private:
  bool visible(const TagSpec& tag, const TagPose& pose) const;

  WorldModel world_;
  SimConfig config_;
  DroneState state_;
  std::mt19937_64 rng_;
};

/// Seed for an independent stream keyed by (seed, a, b).
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0);

}  // namespace tagnav
