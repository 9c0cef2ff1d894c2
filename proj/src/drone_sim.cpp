#include "tagnav/drone_sim.hpp"

#include <Eigen/Geometry>
#include <algorithm>
#include <cmath>
#include <numbers>
#include <set>

#include "tagnav/error.hpp"

namespace tagnav {

Eigen::Matrix3d camera_to_world(double yaw) {
  const double c = std::cos(yaw);
  const double s = std::sin(yaw);
  Eigen::Matrix3d R;
  R.col(0) = Eigen::Vector3d{-s, -c, 0.0};  // right
  R.col(1) = Eigen::Vector3d{0.0, 0.0, -1.0};  // down
  R.col(2) = Eigen::Vector3d{c, -s, 0.0};  // forward
  return R;
}

Eigen::Matrix3d TagSpec::world_rotation() const {
  // A tag with zero pitch/roll is oriented like the camera of a drone at
  // `yaw` that looks straight at it.
  return camera_to_world(yaw_rad) * Eigen::AngleAxisd(pitch_rad, Eigen::Vector3d::UnitX()).toRotationMatrix() *
         Eigen::AngleAxisd(roll_rad, Eigen::Vector3d::UnitZ()).toRotationMatrix();
}

TagPose camera_frame_tag_pose(const Eigen::Vector3d& camera_position, double yaw, const TagSpec& tag) {
  const Eigen::Matrix3d Rwc = camera_to_world(yaw);
  TagPose pose;
  pose.rotation = Rwc.transpose() * tag.world_rotation();
  pose.translation = Rwc.transpose() * (tag.position - camera_position);
  return pose;
}

void WorldModel::validate() const {
  std::set<int> ids;
  for (const auto& t : tags) {
    if (t.id < 0) throw InvalidArgument("tag ids must be non-negative");
    if (!ids.insert(t.id).second) throw InvalidArgument("duplicate tag id " + std::to_string(t.id));
    if (!(t.size_m > 0.0)) throw InvalidArgument("tag size must be positive");
    if (!t.position.allFinite()) throw InvalidArgument("tag position must be finite");
  }
  if (!(detect_max_range_m > 0.0) || !(detect_max_view_angle_rad > 0.0)) {
    throw InvalidArgument("detection limits must be positive");
  }
  if (!(corner_noise_px_sigma >= 0.0) || !(actuation.proportional_sigma >= 0.0) ||
      !(actuation.additive_sigma_m >= 0.0) || !(actuation.turn_sigma_rad >= 0.0)) {
    throw InvalidArgument("noise sigmas must be non-negative");
  }
}

const TagSpec& WorldModel::tag(int id) const {
  auto it = std::find_if(tags.begin(), tags.end(), [id](const TagSpec& t) { return t.id == id; });
  if (it == tags.end()) throw InvalidArgument("unknown tag id " + std::to_string(id));
  return *it;
}

void SimConfig::validate() const {
  if (!(flight_time_s > 0.0) || !(telemetry_rate_hz > 0.0) || !(takeoff_height_m > 0.0)) {
    throw InvalidArgument("sim config values must be positive");
  }
  if (!(cruise_speed_mps > 0.0 && cruise_speed_mps <= kMaxFlightSpeedMps) ||
      !(vertical_speed_mps > 0.0 && vertical_speed_mps <= kMaxFlightSpeedMps) || !(turn_rate_rad_s > 0.0)) {
    throw InvalidArgument("speeds must be positive and within the airframe limit");
  }
  camera.validate();
}

Simulator::Simulator(WorldModel world, SimConfig config)
    : world_(std::move(world)), config_(std::move(config)), rng_(config_.rng_seed) {
  world_.validate();
  config_.validate();
  state_.position = world_.start_position;
  state_.ground_z = world_.start_position.z();
  state_.yaw = normalize_angle(world_.start_yaw_rad);
}

void Simulator::step_time(double dt) {
  if (!(dt >= 0.0)) throw InvalidArgument("time step must be non-negative");
  state_.time_s += dt;
  if (state_.airborne) {
    state_.battery_pct = std::max(0.0, state_.battery_pct - 100.0 * dt / config_.flight_time_s);
  }
}

double Simulator::takeoff() {
  if (state_.airborne) throw SimError("already airborne");
  if (state_.battery_pct <= 0.0) throw SimError("battery depleted");
  state_.airborne = true;
  state_.position.z() = state_.ground_z + config_.takeoff_height_m;
  state_.height_above_takeoff = config_.takeoff_height_m;
  state_.speed.setZero();
  const double duration = config_.takeoff_height_m / config_.vertical_speed_mps;
  step_time(duration);
  return duration;
}

double Simulator::land() {
  if (!state_.airborne) throw SimError("not airborne");
  const double duration = state_.height_above_takeoff / config_.vertical_speed_mps;
  step_time(duration);
  state_.position.z() = state_.ground_z;
  state_.height_above_takeoff = 0.0;
  state_.airborne = false;
  state_.speed.setZero();
  return duration;
}

double Simulator::move(const DroneVector& v) {
  if (!state_.airborne) throw SimError("not airborne");
  if (!v.vec().allFinite()) throw InvalidArgument("move vector must be finite");

  const double c = std::cos(state_.yaw);
  const double s = std::sin(state_.yaw);
  const Eigen::Vector3d heading{c, -s, 0.0};
  const Eigen::Vector3d right{-s, -c, 0.0};
  Eigen::Vector3d delta = v.forward * heading + v.right * right - v.down * Eigen::Vector3d::UnitZ();

  const auto& noise = world_.actuation;
  if (noise.proportional_sigma > 0.0) {
    std::normal_distribution<double> scale(0.0, noise.proportional_sigma);
    delta *= 1.0 + scale(rng_);
  }
  if (noise.additive_sigma_m > 0.0) {
    std::normal_distribution<double> add(0.0, noise.additive_sigma_m);
    for (int i = 0; i < 3; ++i) delta(i) += add(rng_);
  }

  const Eigen::Vector3d target = state_.position + delta;
  if (target.z() - state_.ground_z < kMinAirborneAltitudeM) throw SimError("move would hit the ground");

  const double horizontal = delta.head<2>().norm();
  const double duration =
      std::max(horizontal / config_.cruise_speed_mps, std::abs(delta.z()) / config_.vertical_speed_mps);
  step_time(duration);
  state_.position = target;
  state_.height_above_takeoff = target.z() - state_.ground_z;
  state_.speed = duration > 0.0 ? Eigen::Vector3d(delta / duration) : Eigen::Vector3d::Zero();
  return duration;
}

double Simulator::turn(double theta_cw) {
  if (!state_.airborne) throw SimError("not airborne");
  if (!std::isfinite(theta_cw)) throw InvalidArgument("turn angle must be finite");
  double actual = theta_cw;
  if (world_.actuation.turn_sigma_rad > 0.0) {
    std::normal_distribution<double> noise(0.0, world_.actuation.turn_sigma_rad);
    actual += noise(rng_);
  }
  const double duration = std::abs(theta_cw) / config_.turn_rate_rad_s;
  step_time(duration);
  state_.yaw = normalize_angle(state_.yaw + actual);
  state_.speed.setZero();
  return duration;
}

bool Simulator::visible(const TagSpec& tag, const TagPose& pose) const {
  const Eigen::Vector3d& t = pose.translation;
  if (!(t.z() > 0.0)) return false;
  const double range = t.norm();
  if (range > world_.detect_max_range_m) return false;
  // Angle between the line of sight and the direction the face is seen squarely from.
  const double cos_view = tag_facing_direction(pose).dot(t / range);
  if (std::acos(std::clamp(cos_view, -1.0, 1.0)) > world_.detect_max_view_angle_rad) return false;
  for (const auto& corner : tag_corners_3d(tag.size_m)) {
    const Eigen::Vector3d p = pose.rotation * corner + t;
    if (!(p.z() > 0.0)) return false;
    if (!config_.camera.in_frame(project(p, config_.camera))) return false;
  }
  return true;
}

std::vector<TagObservation> Simulator::observe_tags() {
  std::vector<TagObservation> out;
  std::normal_distribution<double> noise(0.0, world_.corner_noise_px_sigma);
  for (const auto& tag : world_.tags) {
    const TagPose pose = camera_frame_tag_pose(state_.position, state_.yaw, tag);
    if (!visible(tag, pose)) continue;
    TagObservation obs;
    obs.tag_id = tag.id;
    obs.corners = predict_corners(pose, config_.camera, tag.size_m);
    if (world_.corner_noise_px_sigma > 0.0) {
      for (auto& c : obs.corners) {
        c.u += noise(rng_);
        c.v += noise(rng_);
      }
    }
    out.push_back(obs);
  }
  return out;
}

double Simulator::rangefinder(int tag_id) {
  const TagSpec& tag = world_.tag(tag_id);
  double d = (tag.position - state_.position).norm();
  if (world_.rangefinder_noise) {
    std::uniform_real_distribution<double> jitter(-kRangefinderPrecisionM, kRangefinderPrecisionM);
    d += jitter(rng_);
  }
  return d;
}

TelemetryFrame Simulator::telemetry() const {
  TelemetryFrame f;
  f.time_s = state_.time_s;
  f.height_m = state_.airborne ? state_.height_above_takeoff : 0.0;
  f.battery_pct = state_.battery_pct;
  f.speed = state_.speed;
  f.yaw_deg = state_.yaw * 180.0 / std::numbers::pi;
  return f;
}

void Simulator::place(const Eigen::Vector3d& position, double yaw, bool airborne) {
  state_.position = position;
  state_.yaw = normalize_angle(yaw);
  state_.airborne = airborne;
  state_.height_above_takeoff = airborne ? position.z() - state_.ground_z : 0.0;
  state_.speed.setZero();
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b) {
  // splitmix64 over the three words.
  auto mix = [](std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  };
  return mix(mix(mix(seed) ^ a) ^ b);
}

}  // namespace tagnav
