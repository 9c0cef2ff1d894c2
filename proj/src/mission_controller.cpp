#include "tagnav/mission_controller.hpp"

#include <algorithm>
#include <cmath>

#include "tagnav/error.hpp"

namespace tagnav {
namespace {

constexpr double kLevelSlack = 1e-9;

struct PhaseName {
  Phase phase;
  std::string_view name;
};

constexpr PhaseName kPhaseNames[] = {
    {Phase::Idle, "Idle"},           {Phase::TakingOff, "TakingOff"}, {Phase::Sensing, "Sensing"},
    {Phase::Aligning, "Aligning"},   {Phase::Moving, "Moving"},       {Phase::Returning, "Returning"},
    {Phase::Searching, "Searching"}, {Phase::Climbing, "Climbing"},   {Phase::Landing, "Landing"},
    {Phase::Landed, "Landed"},       {Phase::Aborted, "Aborted"},
};

bool is_turn(const std::optional<link::Command>& c) {
  return c && (c->verb == link::Verb::Cw || c->verb == link::Verb::Ccw);
}
bool is_go(const std::optional<link::Command>& c) { return c && c->verb == link::Verb::Go; }
bool is_verb(const std::optional<link::Command>& c, link::Verb v) { return c && c->verb == v; }

link::Command negated(const link::Command& go) { return link::Command::go(-go.x_cm, -go.y_cm, -go.z_cm); }

double go_length_m(const link::Command& go) { return link::meters_from_go(go).norm(); }

// Transition helpers. Each one sets the phase and, when the phase starts
// with a command, places it in `r.command` and `state.in_flight`.
class Machine {
 public:
  Machine(const MissionState& s, const MissionConfig& cfg) : cfg_(cfg) { r_.state = s; }

  StepResult finish() && { return std::move(r_); }
  MissionState& s() { return r_.state; }
  StepResult& r() { return r_; }

  void emit(const link::Command& cmd) {
    r_.state.in_flight = cmd;
    r_.command = cmd;
  }

  void enter_sensing() {
    s().phase = Phase::Sensing;
    s().in_flight.reset();
  }

  void enter_searching() {
    s().phase = Phase::Searching;
    s().turns_done += 1;
    const auto turn = link::turn_from_radians(cfg_.search_turn_rad);
    if (turn) {
      emit(*turn);
    } else {
      after_search_turn();
    }
  }

  void after_search_turn() {
    if (s().turns_done >= cfg_.turns_per_revolution()) {
      enter_climbing();
    } else {
      enter_sensing();
    }
  }

  void enter_climbing() {
    s().turns_done = 0;
    const double next = s().altitude_level + cfg_.altitude_step_m;
    if (next > cfg_.max_altitude_m + kLevelSlack) {
      r_.notes.push_back("maximum altitude reached");
      enter_landing("search exhausted");
      return;
    }
    s().phase = Phase::Climbing;
    s().altitude_level = next;
    const auto climb = link::go_from_meters({0.0, 0.0, -cfg_.altitude_step_m});
    if (climb) {
      emit(*climb);
    } else {
      enter_sensing();
    }
  }

  void enter_aligning(const Maneuver& plan) {
    s().phase = Phase::Aligning;
    s().plan = plan;
    if (const auto turn = link::turn_from_radians(plan.turn_rad)) {
      emit(*turn);
    } else {
      enter_moving();
    }
  }

  void enter_moving() {
    s().phase = Phase::Moving;
    s().queued.clear();
    s().return_path.clear();
    const DroneVector move = s().plan ? s().plan->move : DroneVector{};
    if (move.norm() >= cfg_.min_move_m) {
      for (const auto& piece : split_move(move, cfg_.max_move_m)) {
        const auto go = link::go_from_meters(piece);
        if (go && go_length_m(*go) >= cfg_.min_move_m) s().queued.push_back(*go);
      }
    }
    if (s().queued.empty()) {
      r_.notes.push_back("already at the standoff position");
      s().approaches += 1;
      enter_returning();
      return;
    }
    pop_and_emit();
  }

  void enter_returning() {
    s().phase = Phase::Returning;
    s().queued.clear();
    for (auto it = s().return_path.rbegin(); it != s().return_path.rend(); ++it) s().queued.push_back(*it);
    s().return_path.clear();
    if (s().queued.empty()) {
      s().turns_done = 0;
      enter_searching();
      return;
    }
    pop_and_emit();
  }

  void enter_landing(std::string reason) {
    s().phase = Phase::Landing;
    s().queued.clear();
    if (s().end_reason.empty()) s().end_reason = std::move(reason);
    emit(link::Command::simple(link::Verb::Land));
  }

  void pop_and_emit() {
    const link::Command next = s().queued.front();
    s().queued.erase(s().queued.begin());
    emit(next);
  }

  void violation(const Event& e) {
    r_.violation = "event '" + std::string(event_name(e.kind)) + "' is illegal in phase " +
                   std::string(phase_name(s().phase));
    if (is_airborne(s().phase)) {
      enter_landing("protocol violation");
    }
  }

 private:
  const MissionConfig& cfg_;
  StepResult r_;
};

}  // namespace

std::string_view phase_name(Phase p) {
  for (const auto& e : kPhaseNames) {
    if (e.phase == p) return e.name;
  }
  return "?";
}

std::optional<Phase> phase_from_name(std::string_view name) {
  for (const auto& e : kPhaseNames) {
    if (e.name == name) return e.phase;
  }
  return std::nullopt;
}

bool is_terminal(Phase p) { return p == Phase::Landed || p == Phase::Aborted; }

bool is_airborne(Phase p) { return p != Phase::Idle && !is_terminal(p); }

std::string_view event_name(Event::Kind k) {
  switch (k) {
    case Event::Kind::Start: return "start";
    case Event::Kind::TakeoffDone: return "takeoff-done";
    case Event::Kind::Detections: return "detections";
    case Event::Kind::TurnDone: return "turn-done";
    case Event::Kind::MoveDone: return "move-done";
    case Event::Kind::Landed: return "landed";
    case Event::Kind::Stop: return "stop";
    case Event::Kind::Error: return "error";
  }
  return "?";
}

void MissionConfig::validate() const {
  if (!(tag_size_m > 0.0)) throw InvalidArgument("tag size must be positive");
  if (!(standoff_m >= 0.0)) throw InvalidArgument("standoff must be non-negative");
  if (!(takeoff_height_m > 0.0)) throw InvalidArgument("takeoff height must be positive");
  if (!(altitude_step_m > 0.0)) throw InvalidArgument("altitude step must be positive");
  if (!(max_altitude_m >= takeoff_height_m)) throw InvalidArgument("max altitude is below the takeoff height");
  if (!(search_turn_rad > 0.0 && search_turn_rad <= 2.0 * std::numbers::pi)) {
    throw InvalidArgument("search turn must be in (0, 2 pi]");
  }
  if (!(min_move_m >= 0.0) || !(max_move_m > min_move_m) || max_move_m > link::kMaxGoCm / 100.0) {
    throw InvalidArgument("move limits must satisfy 0 <= min < max <= 5 m");
  }
  if (!(battery_floor_pct >= 0.0 && battery_floor_pct < 100.0)) {
    throw InvalidArgument("battery floor must be a percentage");
  }
}

int MissionConfig::turns_per_revolution() const {
  return std::max(1, static_cast<int>(std::lround(2.0 * std::numbers::pi / search_turn_rad)));
}

std::vector<double> MissionConfig::altitude_levels() const {
  std::vector<double> levels;
  for (double h = takeoff_height_m; h <= max_altitude_m + kLevelSlack; h += altitude_step_m) levels.push_back(h);
  return levels;
}

DroneVector approach_move(const Eigen::Vector3d& tag_translation_cam, double turn_rad, double standoff_m) {
  DroneVector move = rotate_horizontal(camera_to_drone(CameraVector::from(tag_translation_cam)), turn_rad);
  move.forward -= standoff_m;
  return move;
}

Maneuver plan_approach(const TagPose& pose, const MissionConfig& cfg) {
  const Eigen::Vector2d forward = horizontal(camera_to_drone({0.0, 0.0, 1.0}));
  const Eigen::Vector2d facing = horizontal(camera_to_drone(CameraVector::from(tag_facing_direction(pose))));
  if (!(facing.norm() > 1e-6)) throw NoPlan("tag facing direction has no horizontal component");
  Maneuver m;
  m.turn_rad = signed_turn_to_face(forward, facing);
  m.move = approach_move(tag_translation(pose), m.turn_rad, cfg.standoff_m);
  return m;
}

std::vector<DroneVector> split_move(const DroneVector& move, double cap) {
  if (!(cap > 0.0)) throw InvalidArgument("move cap must be positive");
  const double len = move.norm();
  const int pieces = std::max(1, static_cast<int>(std::ceil(len / cap - 1e-12)));
  const DroneVector piece{move.forward / pieces, move.right / pieces, move.down / pieces};
  return std::vector<DroneVector>(static_cast<std::size_t>(pieces), piece);
}

void Odometry::apply(const link::Command& cmd) {
  switch (cmd.verb) {
    case link::Verb::Go: {
      const DroneVector v = link::meters_from_go(cmd);
      const double c = std::cos(yaw);
      const double s = std::sin(yaw);
      position += v.forward * Eigen::Vector3d{c, -s, 0.0} + v.right * Eigen::Vector3d{-s, -c, 0.0} -
                  v.down * Eigen::Vector3d::UnitZ();
      break;
    }
    case link::Verb::Cw:
    case link::Verb::Ccw:
      yaw = normalize_angle(yaw + link::radians_from_turn(cmd));
      break;
    case link::Verb::Land:
      position.z() = 0.0;
      break;
    default:
      break;
  }
}

StepResult step(const MissionState& state, const Event& event, const MissionConfig& cfg) {
  Machine m(state, cfg);
  MissionState& s = m.s();
  using K = Event::Kind;

  if (is_terminal(s.phase)) {
    if (event.kind != K::Stop) m.r().violation = "mission already finished";
    return std::move(m).finish();
  }

  if (event.kind == K::Error) {
    if (event.link_down || s.phase == Phase::TakingOff || s.phase == Phase::Landing || s.phase == Phase::Idle) {
      s.phase = Phase::Aborted;
      s.in_flight.reset();
      s.queued.clear();
      s.end_reason = event.reason;
    } else {
      m.r().notes.push_back("drone rejected a command: " + event.reason);
      m.enter_landing(event.reason);
    }
    return std::move(m).finish();
  }

  if (event.kind == K::Stop) {
    if (s.phase == Phase::Idle || s.phase == Phase::Landing) return std::move(m).finish();
    if (s.phase == Phase::TakingOff && is_verb(s.in_flight, link::Verb::Takeoff)) {
      // The takeoff was never confirmed, so the drone is still on the ground.
      s.phase = Phase::Landed;
      s.in_flight.reset();
      s.end_reason = event.reason;
      return std::move(m).finish();
    }
    m.enter_landing(event.reason);
    return std::move(m).finish();
  }

  switch (s.phase) {
    case Phase::Idle:
      if (event.kind != K::Start) break;
      cfg.validate();
      s.phase = Phase::TakingOff;
      m.emit(link::Command::simple(link::Verb::Takeoff));
      return std::move(m).finish();

    case Phase::TakingOff:
      if (event.kind != K::TakeoffDone || !is_verb(s.in_flight, link::Verb::Takeoff)) break;
      s.odometry.position.z() = cfg.takeoff_height_m;
      s.altitude_level = cfg.takeoff_height_m;
      s.anchor_xy = s.odometry.position.head<2>();
      m.enter_sensing();
      return std::move(m).finish();

    case Phase::Sensing: {
      if (event.kind != K::Detections) break;
      if (event.detections.empty()) {
        m.r().notes.push_back("no marker detected");
        m.enter_searching();
        return std::move(m).finish();
      }
      const auto nearest = std::min_element(
          event.detections.begin(), event.detections.end(),
          [](const TagPose& a, const TagPose& b) { return a.translation.norm() < b.translation.norm(); });
      s.last_detection = *nearest;
      try {
        Maneuver plan = plan_approach(*nearest, cfg);
        // Commands turn in whole degrees; express the move for the turn
        // that will actually be executed.
        const auto turn = link::turn_from_radians(plan.turn_rad);
        const double executed = turn ? link::radians_from_turn(*turn) : 0.0;
        plan.move = approach_move(nearest->translation, executed, cfg.standoff_m);
        plan.turn_rad = executed;
        m.enter_aligning(plan);
      } catch (const Error& e) {
        m.r().notes.push_back(std::string("cannot plan approach: ") + e.what());
        m.enter_searching();
      }
      return std::move(m).finish();
    }

    case Phase::Aligning:
      if (event.kind != K::TurnDone || !is_turn(s.in_flight)) break;
      s.odometry.apply(*s.in_flight);
      m.enter_moving();
      return std::move(m).finish();

    case Phase::Moving:
      if (event.kind != K::MoveDone || !is_go(s.in_flight)) break;
      s.odometry.apply(*s.in_flight);
      s.return_path.push_back(negated(*s.in_flight));
      if (!s.queued.empty()) {
        m.pop_and_emit();
      } else {
        s.approaches += 1;
        m.enter_returning();
      }
      return std::move(m).finish();

    case Phase::Returning:
      if (event.kind != K::MoveDone || !is_go(s.in_flight)) break;
      s.odometry.apply(*s.in_flight);
      if (!s.queued.empty()) {
        m.pop_and_emit();
      } else {
        s.turns_done = 0;
        m.enter_searching();
      }
      return std::move(m).finish();

    case Phase::Searching:
      if (event.kind != K::TurnDone || !is_turn(s.in_flight)) break;
      s.odometry.apply(*s.in_flight);
      m.after_search_turn();
      return std::move(m).finish();

    case Phase::Climbing:
      if (event.kind != K::MoveDone || !is_go(s.in_flight)) break;
      s.odometry.apply(*s.in_flight);
      m.enter_sensing();
      return std::move(m).finish();

    case Phase::Landing:
      if (event.kind != K::Landed || !is_verb(s.in_flight, link::Verb::Land)) break;
      s.odometry.apply(*s.in_flight);
      s.phase = Phase::Landed;
      s.in_flight.reset();
      return std::move(m).finish();

    case Phase::Landed:
    case Phase::Aborted:
      break;
  }

  m.violation(event);
  return std::move(m).finish();
}

}  // namespace tagnav
