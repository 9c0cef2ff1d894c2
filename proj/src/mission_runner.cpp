#include "tagnav/mission_runner.hpp"

#include <json.hpp>

#include "tagnav/error.hpp"
#include "text_util.hpp"

namespace tagnav {

SimDetector::SimDetector(link::LinkServer& server)
    : server_(server), camera_(server.with_sim([](const Simulator& s) { return s.camera(); })) {}

std::vector<TagObservation> SimDetector::capture() {
  return server_.with_sim_mut([](Simulator& s) { return s.observe_tags(); });
}

ReplayDetector::ReplayDetector(std::vector<std::vector<TagObservation>> frames, CameraIntrinsics camera)
    : frames_(frames.begin(), frames.end()), camera_(camera) {}

std::vector<TagObservation> ReplayDetector::capture() {
  if (frames_.empty()) return {};
  auto out = std::move(frames_.front());
  frames_.pop_front();
  return out;
}

PoseProbe sim_pose_probe(const link::LinkServer& server) {
  return [&server] {
    const DroneState s = server.state();
    return DronePose{s.position.x(), s.position.y(), s.position.z(), s.yaw};
  };
}

std::string to_json_line(const LogRecord& r) {
  using detail::format_double;
  std::string out = "{\"t\":" + format_double(r.t) + ",\"phase\":\"" + std::string(phase_name(r.phase)) + "\",\"cmd\":";
  out += r.cmd ? "\"" + *r.cmd + "\"" : "null";
  out += ",\"pose\":";
  if (r.pose) {
    out += "{\"R\":[";
    for (int i = 0; i < 3; ++i) {
      for (int j = 0; j < 3; ++j) {
        if (i + j > 0) out += ',';
        out += format_double(r.pose->rotation(i, j));
      }
    }
    out += "],\"t\":[" + format_double(r.pose->translation.x()) + ',' + format_double(r.pose->translation.y()) +
           ',' + format_double(r.pose->translation.z()) + "]}";
  } else {
    out += "null";
  }
  out += ",\"drone_xy_z_yaw\":[" + format_double(r.drone.x) + ',' + format_double(r.drone.y) + ',' +
         format_double(r.drone.z) + ',' + format_double(r.drone.yaw) + "]}";
  return out;
}

LogRecord parse_log_line(const std::string& line) {
  try {
    const auto j = nlohmann::json::parse(line);
    LogRecord r;
    r.t = j.at("t").get<double>();
    const auto phase = phase_from_name(j.at("phase").get<std::string>());
    if (!phase) throw FormatError("unknown phase in log line");
    r.phase = *phase;
    if (!j.at("cmd").is_null()) r.cmd = j.at("cmd").get<std::string>();
    if (!j.at("pose").is_null()) {
      TagPose p;
      const auto& R = j.at("pose").at("R");
      const auto& t = j.at("pose").at("t");
      for (int i = 0; i < 9; ++i) p.rotation(i / 3, i % 3) = R.at(static_cast<std::size_t>(i)).get<double>();
      for (int i = 0; i < 3; ++i) p.translation(i) = t.at(static_cast<std::size_t>(i)).get<double>();
      r.pose = p;
    }
    const auto& d = j.at("drone_xy_z_yaw");
    r.drone = {d.at(0).get<double>(), d.at(1).get<double>(), d.at(2).get<double>(), d.at(3).get<double>()};
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("bad mission log line: ") + e.what());
  }
}

std::string MissionLog::to_jsonl() const {
  std::string out;
  for (const auto& r : records) {
    out += to_json_line(r);
    out += '\n';
  }
  return out;
}

std::string_view severity_name(Severity s) {
  switch (s) {
    case Severity::Info: return "info";
    case Severity::Warn: return "warn";
    case Severity::Error: return "error";
  }
  return "info";
}

MissionRunner::MissionRunner(MissionConfig cfg, link::LinkClient& client, Detector& detector, const Clock& clock,
                             PoseProbe probe, MissionObserver observer)
    : cfg_(cfg),
      client_(client),
      detector_(detector),
      clock_(clock),
      probe_(std::move(probe)),
      observer_(std::move(observer)) {
  cfg_.validate();
}

StopAck MissionRunner::stop(std::string reason) {
  const Phase p = phase_.load();
  if (is_terminal(p)) return {false, p};
  std::lock_guard lock(stop_mutex_);
  if (!stop_reason_) stop_reason_ = std::move(reason);
  return {started_.load(), p};
}

std::optional<std::string> MissionRunner::pending_stop() {
  std::lock_guard lock(stop_mutex_);
  return stop_reason_;
}

void MissionRunner::message(Severity s, const std::string& text) {
  if (observer_.on_message) observer_.on_message(s, text);
}

void MissionRunner::feed(const Event& e) {
  const Phase before = state_.phase;
  const int approaches_before = state_.approaches;
  StepResult r = step(state_, e, cfg_);
  state_ = std::move(r.state);
  next_ = r.command;

  for (const auto& note : r.notes) message(Severity::Warn, note);
  if (r.violation) message(Severity::Error, *r.violation);

  LogRecord rec;
  rec.t = clock_.now();
  rec.phase = state_.phase;
  if (r.command) rec.cmd = link::encode(*r.command);
  if (e.kind == Event::Kind::Detections && !e.detections.empty()) rec.pose = state_.last_detection;
  if (probe_) {
    rec.drone = probe_();
  } else {
    const auto& o = state_.odometry;
    rec.drone = {o.position.x(), o.position.y(), o.position.z(), o.yaw};
  }
  log_.records.push_back(rec);
  if (state_.approaches > approaches_before) log_.hovers.push_back(rec.drone);
  phase_.store(state_.phase);
  if (observer_.on_record) observer_.on_record(rec);
  if (before != state_.phase) {
    message(Severity::Info, "phase " + std::string(phase_name(before)) + " -> " + std::string(phase_name(state_.phase)));
  }
}

std::vector<TagPose> MissionRunner::sense() {
  std::vector<TagPose> poses;
  for (const auto& obs : detector_.capture()) {
    try {
      poses.push_back(estimate_tag_pose(obs, detector_.intrinsics(), cfg_.tag_size_m));
    } catch (const Error& err) {
      message(Severity::Warn, "tag " + std::to_string(obs.tag_id) + " rejected: " + err.what());
    }
  }
  return poses;
}

MissionLog MissionRunner::run() {
  started_.store(true);
  feed(Event::start());

  while (!is_terminal(state_.phase)) {
    if (auto reason = pending_stop(); reason && state_.phase != Phase::Landing) {
      feed(Event::stop(*reason));
      continue;
    }

    if (next_) {
      const link::Command cmd = *next_;
      link::Reply reply;
      try {
        reply = client_.request(cmd);
        log_.commands.push_back(cmd);
      } catch (const LinkDown& e) {
        message(Severity::Error, e.what());
        feed(Event::error(e.what(), true));
        continue;
      }
      if (!reply.is_ok()) {
        feed(Event::error(reply.text, false));
        continue;
      }
      switch (cmd.verb) {
        case link::Verb::Takeoff: feed(Event::takeoff_done()); break;
        case link::Verb::Land: feed(Event::landed()); break;
        case link::Verb::Go: feed(Event::move_done()); break;
        case link::Verb::Cw:
        case link::Verb::Ccw: feed(Event::turn_done()); break;
        default: feed(Event::error("unexpected command " + link::encode(cmd), false)); break;
      }
      continue;
    }

    if (state_.phase == Phase::Sensing) {
      try {
        const link::Reply battery = client_.request(link::Command::simple(link::Verb::Battery));
        const auto pct = battery.kind == link::Reply::Kind::Value ? detail::parse_double(battery.text) : std::nullopt;
        if (pct && *pct < cfg_.battery_floor_pct) {
          message(Severity::Warn, "battery at " + battery.text + "%, landing");
          feed(Event::stop("battery below floor"));
          continue;
        }
      } catch (const LinkDown& e) {
        message(Severity::Error, e.what());
        feed(Event::error(e.what(), true));
        continue;
      }
      feed(Event::seen(sense()));
      continue;
    }

    // A non-terminal phase without a command to run is a controller bug;
    // land rather than spin.
    if (state_.phase == Phase::Landing) {
      feed(Event::error("controller stalled", true));
    } else {
      feed(Event::stop("controller stalled"));
    }
  }

  log_.final_phase = state_.phase;
  log_.end_reason = state_.end_reason;
  log_.approaches = state_.approaches;
  return log_;
}

MissionLog run_mission(const MissionConfig& cfg, link::LinkClient& client, Detector& detector, const Clock& clock,
                       PoseProbe probe) {
  MissionRunner runner(cfg, client, detector, clock, std::move(probe));
  return runner.run();
}

}  // namespace tagnav
