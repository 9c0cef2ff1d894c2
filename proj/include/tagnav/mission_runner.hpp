#pragma once

#include <atomic>
#include <deque>
#include <functional>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "tagnav/camera_model.hpp"
#include "tagnav/drone_link.hpp"
#include "tagnav/mission_controller.hpp"

namespace tagnav {

/// Source of camera snapshots (corner-level tag detections).
class Detector {
 public:
  virtual ~Detector() = default;
  virtual std::vector<TagObservation> capture() = 0;
  virtual const CameraIntrinsics& intrinsics() const = 0;
};

/// Snapshots rendered by the simulator behind a link server.
class SimDetector final : public Detector {
 public:
  explicit SimDetector(link::LinkServer& server);
  std::vector<TagObservation> capture() override;
  const CameraIntrinsics& intrinsics() const override { return camera_; }

 private:
  link::LinkServer& server_;
  CameraIntrinsics camera_;
};

/// Plays back recorded frames, one per capture; empty once exhausted.
class ReplayDetector final : public Detector {
 public:
  ReplayDetector(std::vector<std::vector<TagObservation>> frames, CameraIntrinsics camera);
  std::vector<TagObservation> capture() override;
  const CameraIntrinsics& intrinsics() const override { return camera_; }

 private:
  std::deque<std::vector<TagObservation>> frames_;
  CameraIntrinsics camera_;
};

class Clock {
 public:
  virtual ~Clock() = default;
  virtual double now() const = 0;
};

/// Simulated time of the drone behind a link server.
class SimClock final : public Clock {
 public:
  explicit SimClock(const link::LinkServer& server) : server_(server) {}
  double now() const override { return server_.telemetry().time_s; }

 private:
  const link::LinkServer& server_;
};

struct DronePose {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;
  double yaw = 0.0;

  friend bool operator==(const DronePose&, const DronePose&) = default;
};

/// Ground-truth pose source used for logging; falls back to dead reckoning
/// when absent.
using PoseProbe = std::function<DronePose()>;

PoseProbe sim_pose_probe(const link::LinkServer& server);

struct LogRecord {
  double t = 0.0;
  Phase phase = Phase::Idle;
  std::optional<std::string> cmd;
  std::optional<TagPose> pose;
  DronePose drone;
};

/// `{"t": s, "phase": "...", "cmd": "..."|null, "pose": {"R": [9 row-major], "t": [3]}|null,
///   "drone_xy_z_yaw": [x, y, z, yaw]}`
std::string to_json_line(const LogRecord& r);
LogRecord parse_log_line(const std::string& line);

struct MissionLog {
  std::vector<LogRecord> records;
  Phase final_phase = Phase::Idle;
  std::string end_reason;
  int approaches = 0;
  std::vector<link::Command> commands;  ///< every command sent, in order
  std::vector<DronePose> hovers;        ///< drone pose at the end of each approach

  std::string to_jsonl() const;
};

enum class Severity { Info, Warn, Error };
std::string_view severity_name(Severity s);

struct MissionObserver {
  std::function<void(const LogRecord&)> on_record;
  std::function<void(Severity, const std::string&)> on_message;
};

struct StopAck {
  bool was_running = false;
  Phase phase = Phase::Idle;
};

/// Drives the mission state machine: executes its commands over the link,
/// captures and estimates tag poses while sensing, and feeds completions back.
class MissionRunner {
 public:
  MissionRunner(MissionConfig cfg, link::LinkClient& client, Detector& detector, const Clock& clock,
                PoseProbe probe = {}, MissionObserver observer = {});

  /// Blocks until the mission is Landed or Aborted.
  MissionLog run();

  /// Thread-safe. The next step lands regardless of phase; idempotent and a
  /// no-op once the mission has finished. A stop requested before run()
  /// is kept, and the mission then ends without leaving the ground.
  StopAck stop(std::string reason = "stop requested");

  Phase phase() const { return phase_.load(); }

 private:
  void feed(const Event& e);
  void message(Severity s, const std::string& text);
  std::vector<TagPose> sense();
  std::optional<std::string> pending_stop();

  MissionConfig cfg_;
  link::LinkClient& client_;
  Detector& detector_;
  const Clock& clock_;
  PoseProbe probe_;
  MissionObserver observer_;

  MissionState state_;
  std::optional<link::Command> next_;
  MissionLog log_;
  std::atomic<Phase> phase_{Phase::Idle};
  std::atomic<bool> started_{false};
  std::mutex stop_mutex_;
  std::optional<std::string> stop_reason_;
};

MissionLog run_mission(const MissionConfig& cfg, link::LinkClient& client, Detector& detector, const Clock& clock,
                       PoseProbe probe = {});

}  // namespace tagnav
