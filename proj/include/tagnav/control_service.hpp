#pragma once

#include <condition_variable>
#include <cstdint>
#include <deque>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "tagnav/mission_runner.hpp"
#include "tagnav/world_io.hpp"

namespace tagnav {

struct MissionRequest {
  double tag_size_m = 0.0;  ///< required, no default
  double max_altitude_m = 2.0;
  double standoff_m = 0.5;
  double altitude_step_m = 0.5;
  std::string world_ref;  ///< world file name; empty selects the service default
  std::optional<std::uint64_t> seed;

  /// Throws InvalidArgument when the resulting mission configuration is invalid.
  MissionConfig to_config() const;
};

/// Parses a JSON request body. Unknown keys are rejected.
MissionRequest parse_mission_request(const std::string& body);

struct EventMessage {
  double timestamp = 0.0;  ///< simulated seconds since the mission started
  Severity severity = Severity::Info;
  std::string text;
};

struct TelemetrySnapshot {
  double time_s = 0.0;
  double height_m = 0.0;
  double battery_pct = 100.0;
  Phase phase = Phase::Idle;
  DronePose pose;
};

struct TrajectoryPoint {
  double t = 0.0;
  DronePose pose;
};

/// Marker position in the world estimated from a detection and the drone pose.
struct MarkerEstimate {
  double t = 0.0;
  Eigen::Vector3d position = Eigen::Vector3d::Zero();
};

struct Trajectory {
  std::vector<TrajectoryPoint> points;
  std::vector<MarkerEstimate> markers;
};

/// Rebuilds the trajectory view of a mission log. `start` is the pose
/// before takeoff and always comes first.
Trajectory trajectory_from_log(const std::vector<LogRecord>& records, const DronePose& start);

/// Item of the live event stream.
struct StreamEvent {
  enum class Kind { Telemetry, Message, Phase };
  Kind kind = Kind::Telemetry;
  std::string json;  ///< payload object
};

std::string_view stream_event_name(StreamEvent::Kind k);

/// Fan-out of stream events to any number of subscribers. Each subscriber
/// owns a bounded queue; when it overflows, telemetry frames are dropped
/// first so that phase changes and messages survive a slow reader.
class EventHub {
 public:
  class Subscription {
   public:
    /// Next event, or nullopt after `timeout` or once the hub is closed.
    std::optional<StreamEvent> next(std::chrono::milliseconds timeout);
    bool closed() const;
    std::size_t dropped() const;

   private:
    friend class EventHub;
    void push(const StreamEvent& e, std::size_t capacity);
    void close();

    mutable std::mutex mutex_;
    std::condition_variable cv_;
    std::deque<StreamEvent> queue_;
    std::size_t dropped_ = 0;
    bool closed_ = false;
  };

  explicit EventHub(std::size_t capacity = 256) : capacity_(capacity) {}

  std::shared_ptr<Subscription> subscribe();
  void unsubscribe(const std::shared_ptr<Subscription>& s);
  void publish(const StreamEvent& e);
  /// Wakes and detaches every subscriber.
  void close();
  std::size_t subscribers() const;

 private:
  mutable std::mutex mutex_;
  std::vector<std::shared_ptr<Subscription>> subs_;
  std::size_t capacity_;
  bool closed_ = false;
};

struct ServiceOptions {
  std::filesystem::path worlds_dir = "worlds";
  std::filesystem::path data_dir = "missions";
  std::string default_world = "one_tag.json";
  /// Real seconds slept per simulated second of flight; 0 runs unpaced.
  double time_scale = 1.0;
  double telemetry_rate_hz = 10.0;
  link::LossModel loss{};
};

/// Owns the simulated drone and at most one running mission. Mission logs
/// are persisted as `<data_dir>/<mission_id>.jsonl`.
class MissionService {
 public:
  explicit MissionService(ServiceOptions options);
  ~MissionService();
  MissionService(const MissionService&) = delete;
  MissionService& operator=(const MissionService&) = delete;

  /// Throws InvalidArgument for a bad request or unknown world, Conflict
  /// while another mission is active.
  std::string start(const MissionRequest& req);

  /// Requests a landing. Idempotent; returns the phase seen when the stop
  /// was accepted. Throws NotFound for an unknown id.
  StopAck stop(const std::string& id);

  TelemetrySnapshot telemetry() const;

  /// Throws NotFound for an unknown id.
  Trajectory trajectory(const std::string& id) const;
  std::vector<LogRecord> records(const std::string& id) const;
  std::vector<EventMessage> messages(const std::string& id) const;

  /// Blocks until the mission finishes; returns its final phase.
  Phase wait(const std::string& id);

  bool active() const;
  EventHub& hub() { return hub_; }
  const ServiceOptions& options() const { return options_; }

 private:
  struct Mission;

  WorldFile resolve_world(const std::string& ref) const;
  std::shared_ptr<Mission> find(const std::string& id) const;
  std::string next_id();
  void telemetry_loop(std::stop_token st);
  void publish_phase(const std::string& id, const LogRecord& r);
  void publish_message(const std::string& id, const EventMessage& m);

  ServiceOptions options_;
  EventHub hub_;
  mutable std::mutex mutex_;
  std::map<std::string, std::shared_ptr<Mission>> missions_;
  std::shared_ptr<Mission> current_;
  WorldFile idle_world_;
  std::uint64_t counter_ = 0;
  std::jthread telemetry_thread_;
};

class HttpServer {
 public:
  explicit HttpServer(MissionService& service);
  ~HttpServer();
  HttpServer(const HttpServer&) = delete;
  HttpServer& operator=(const HttpServer&) = delete;

  /// Binds (port 0 picks a free one) and serves on a background thread.
  int start(const std::string& host, int port);
  void stop();
  int port() const { return port_; }

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
  int port_ = 0;
};

std::string telemetry_json(const TelemetrySnapshot& t);
std::string trajectory_json(const Trajectory& t);

}  // namespace tagnav
