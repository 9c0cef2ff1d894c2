#pragma once

#include <Eigen/Core>
#include <numbers>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "tagnav/drone_link.hpp"
#include "tagnav/frame_transforms.hpp"
#include "tagnav/tag_pose.hpp"

namespace tagnav {

enum class Phase {
  Idle,
  TakingOff,
  Sensing,
  Aligning,
  Moving,
  Returning,
  Searching,
  Climbing,
  Landing,
  Landed,
  Aborted,
};

std::string_view phase_name(Phase p);
std::optional<Phase> phase_from_name(std::string_view name);
bool is_terminal(Phase p);
bool is_airborne(Phase p);

struct MissionConfig {
  double tag_size_m = 0.184;
  double standoff_m = 0.5;  ///< final distance kept in front of the marker
  double takeoff_height_m = 0.8;
  double altitude_step_m = 0.5;
  double max_altitude_m = 2.0;
  double search_turn_rad = std::numbers::pi / 4.0;
  double min_move_m = 0.02;  ///< deadband; shorter moves are never commanded
  double max_move_m = 5.0;   ///< per-command cap; longer moves are split
  double battery_floor_pct = 10.0;

  void validate() const;
  int turns_per_revolution() const;
  /// Scan altitudes: takeoff height, then one step higher while <= max.
  std::vector<double> altitude_levels() const;
};

/// One approach: a clockwise turn, then a body-frame move.
struct Maneuver {
  double turn_rad = 0.0;
  DroneVector move{};
};

/// Turn that squares the drone up with the tag, and the move (expressed in
/// the post-turn body frame) that stops `standoff_m` in front of it. The
/// vertical offset to the tag centre is passed through. Throws NoPlan when
/// the tag's facing direction has no horizontal component.
Maneuver plan_approach(const TagPose& pose, const MissionConfig& cfg);

/// Move part of an approach for a given executed turn.
DroneVector approach_move(const Eigen::Vector3d& tag_translation_cam, double turn_rad, double standoff_m);

/// Splits a move into equal pieces no longer than `cap`.
std::vector<DroneVector> split_move(const DroneVector& move, double cap);

/// Dead-reckoned pose relative to the takeoff point: x, y horizontal, z up,
/// yaw clockwise from the initial heading.
struct Odometry {
  Eigen::Vector3d position = Eigen::Vector3d::Zero();
  double yaw = 0.0;

  void apply(const link::Command& cmd);
};

struct MissionState {
  Phase phase = Phase::Idle;
  int turns_done = 0;
  double altitude_level = 0.0;
  Eigen::Vector2d anchor_xy = Eigen::Vector2d::Zero();
  std::optional<TagPose> last_detection;
  std::optional<Maneuver> plan;

  std::optional<link::Command> in_flight;  ///< emitted, completion not yet reported
  std::vector<link::Command> queued;        ///< remaining commands of the current phase
  std::vector<link::Command> return_path;   ///< undoes the current approach, in order
  Odometry odometry;
  int approaches = 0;
  std::string end_reason;
};

struct Event {
  enum class Kind { Start, TakeoffDone, Detections, TurnDone, MoveDone, Landed, Stop, Error };

  Kind kind = Kind::Start;
  std::vector<TagPose> detections;
  std::string reason;
  bool link_down = false;

  static Event start() { return {Kind::Start, {}, {}, false}; }
  static Event takeoff_done() { return {Kind::TakeoffDone, {}, {}, false}; }
  static Event seen(std::vector<TagPose> d) { return {Kind::Detections, std::move(d), {}, false}; }
  static Event turn_done() { return {Kind::TurnDone, {}, {}, false}; }
  static Event move_done() { return {Kind::MoveDone, {}, {}, false}; }
  static Event landed() { return {Kind::Landed, {}, {}, false}; }
  static Event stop(std::string reason = "stop requested") { return {Kind::Stop, {}, std::move(reason), false}; }
  static Event error(std::string reason, bool link_down) { return {Kind::Error, {}, std::move(reason), link_down}; }
};

std::string_view event_name(Event::Kind k);

struct StepResult {
  MissionState state;
  std::optional<link::Command> command;  ///< next command for the drone link
  std::optional<std::string> violation;  ///< set for an illegal (phase, event) pair
  std::vector<std::string> notes;        ///< human-readable remarks (no detection, ...)
};

/// Pure transition function of the mission procedure.
///
///   Idle       --start-->          TakingOff (takeoff)
///   TakingOff  --takeoff-done-->   Sensing
///   Sensing    --detections-->     Aligning (turn) if any tag, else Searching
///   Aligning   --turn-done-->      Moving (go...)
///   Moving     --move-done-->      Returning (go... back to the anchor)
///   Returning  --move-done-->      Searching (turn counter reset)
///   Searching  --turn-done-->      Sensing, or Climbing after a full revolution
///   Climbing   --move-done-->      Sensing; Landing when the next level exceeds the maximum
///   Landing    --landed-->         Landed
///
/// Stop from any airborne phase lands. Link loss aborts. Illegal pairs are
/// reported as a violation and land.
StepResult step(const MissionState& state, const Event& event, const MissionConfig& cfg);

}  // namespace tagnav
