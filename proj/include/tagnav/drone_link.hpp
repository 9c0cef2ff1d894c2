#pragma once

#include <chrono>
#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <random>
#include <string>
#include <string_view>

#include "tagnav/drone_sim.hpp"
#include "tagnav/frame_transforms.hpp"

namespace tagnav::link {

// Wire grammar (one ASCII line, single spaces, no trailing newline):
//   command | takeoff | land | stop
//   go <x> <y> <z>     signed integer centimetres, drone frame, each in [-500, 500], not all zero
//   cw <deg> | ccw <deg>   integer degrees in [1, 360]
//   battery? | height? | speed? | orientation?

enum class Verb { Command, Takeoff, Land, Go, Cw, Ccw, Battery, Height, Speed, Orientation, Stop };

inline constexpr int kMaxGoCm = 500;
inline constexpr int kMaxTurnDeg = 360;
inline constexpr std::size_t kMaxReplyBytes = 128;

struct Command {
  Verb verb = Verb::Command;
  int x_cm = 0;  ///< forward
  int y_cm = 0;  ///< right
  int z_cm = 0;  ///< down
  int degrees = 0;

  static Command simple(Verb v) { return {v, 0, 0, 0, 0}; }
  static Command go(int x, int y, int z) { return {Verb::Go, x, y, z, 0}; }
  static Command cw(int deg) { return {Verb::Cw, 0, 0, 0, deg}; }
  static Command ccw(int deg) { return {Verb::Ccw, 0, 0, 0, deg}; }

  bool is_query() const;
  friend bool operator==(const Command&, const Command&) = default;
};

std::string encode(const Command& cmd);

/// Strict parser; ParseError messages name the offending token.
Command parse(std::string_view line);

/// Rounds a metric body-frame move to whole centimetres. Returns nullopt
/// when every component rounds to zero; throws InvalidArgument if any
/// component exceeds the per-command range.
std::optional<Command> go_from_meters(const DroneVector& v);
DroneVector meters_from_go(const Command& cmd);

/// Rounds a clockwise turn to whole degrees (cw for positive, ccw for
/// negative). Returns nullopt for turns that round to zero degrees.
std::optional<Command> turn_from_radians(double theta_cw);

/// Signed clockwise angle of a cw/ccw command, radians.
double radians_from_turn(const Command& cmd);

struct Reply {
  enum class Kind { Ok, Error, Value };
  Kind kind = Kind::Ok;
  std::string text;  ///< error message or query answer

  static Reply ok() { return {Kind::Ok, {}}; }
  static Reply error(std::string message) { return {Kind::Error, std::move(message)}; }
  static Reply value(std::string v) { return {Kind::Value, std::move(v)}; }

  bool is_ok() const { return kind == Kind::Ok; }
  friend bool operator==(const Reply&, const Reply&) = default;
};

std::string encode(const Reply& reply);
Reply parse_reply(std::string_view line);

// Telemetry push line:
//   h:<cm>;bat:<pct>;vgx:<cm/s>;vgy:<cm/s>;vgz:<cm/s>;pitch:<deg>;roll:<deg>;yaw:<deg>
struct TelemetryLine {
  int height_cm = 0;
  int battery_pct = 0;
  int vgx = 0;
  int vgy = 0;
  int vgz = 0;
  int pitch_deg = 0;
  int roll_deg = 0;
  int yaw_deg = 0;

  static TelemetryLine from(const TelemetryFrame& f);
  friend bool operator==(const TelemetryLine&, const TelemetryLine&) = default;
};

std::string format_telemetry(const TelemetryLine& t);
TelemetryLine parse_telemetry(std::string_view line);

/// Transport envelope carrying the duplicate-suppression token:
/// `#<session>-<seq> <payload>`. The server remembers the last sequence
/// number per client session and answers a repeat from its cache instead of
/// executing again. Unframed payloads are executed without suppression.
struct Frame {
  std::uint32_t session = 0;
  std::uint64_t seq = 0;
  std::string payload;
};

std::string encode_frame(const Frame& f);
std::optional<Frame> parse_frame(std::string_view datagram);

/// Executes parsed commands against a simulator. Transport independent: a
/// datagram goes in, an optional reply datagram comes out. Command
/// execution is serialized.
class LinkServer {
 public:
  /// Called after each motion command with its simulated duration, outside
  /// the simulator lock. Used to pace simulated flights in real time.
  using Pacer = std::function<void(double sim_seconds)>;

  explicit LinkServer(Simulator& sim);

  std::optional<std::string> handle(std::string_view datagram);
  Reply execute(const Command& cmd);

  std::string telemetry_line() const;
  TelemetryFrame telemetry() const;
  DroneState state() const;

  /// Runs `fn(sim)` under the simulator lock.
  template <typename Fn>
  auto with_sim(Fn&& fn) const {
    std::lock_guard lock(mutex_);
    return fn(static_cast<const Simulator&>(sim_));
  }
  template <typename Fn>
  auto with_sim_mut(Fn&& fn) {
    std::lock_guard lock(mutex_);
    return fn(sim_);
  }

  void set_pacer(Pacer pacer) { pacer_ = std::move(pacer); }
  std::uint64_t executed() const;

 private:
  Reply execute_locked(const Command& cmd, double& duration);

  Simulator& sim_;
  mutable std::mutex mutex_;
  struct SessionMemory {
    std::uint64_t last_seq = 0;
    std::string last_reply;
  };
  std::map<std::uint32_t, SessionMemory> sessions_;
  std::uint64_t executed_ = 0;
  Pacer pacer_;
};

class Transport {
 public:
  virtual ~Transport() = default;
  virtual void send(std::string_view datagram) = 0;
  /// Next datagram, or nullopt once `timeout` elapses.
  virtual std::optional<std::string> receive(std::chrono::milliseconds timeout) = 0;
};

struct LossModel {
  double drop_probability = 0.0;
  double duplicate_probability = 0.0;
  std::uint64_t seed = 0;
};

/// In-process transport. Delivery is synchronous, so a lost datagram shows
/// up as an immediate timeout on receive() rather than a real wait.
class LoopbackTransport final : public Transport {
 public:
  explicit LoopbackTransport(LinkServer& server, LossModel loss = {});

  void send(std::string_view datagram) override;
  std::optional<std::string> receive(std::chrono::milliseconds timeout) override;

  std::uint64_t dropped() const { return dropped_; }
  std::uint64_t duplicated() const { return duplicated_; }

 private:
  bool lose();
  bool duplicate();

  LinkServer& server_;
  LossModel loss_;
  std::mt19937_64 rng_;
  std::deque<std::string> inbox_;
  std::uint64_t dropped_ = 0;
  std::uint64_t duplicated_ = 0;
};

struct ClientOptions {
  std::chrono::milliseconds timeout{7000};
  int retries = 2;
};

/// Request/response client: one request in flight, resent with the same
/// sequence token until answered or retries are exhausted (LinkDown).
class LinkClient {
 public:
  /// `session` distinguishes this client's sequence numbers on the server;
  /// defaults to a random value.
  explicit LinkClient(Transport& transport, ClientOptions options = {},
                      std::optional<std::uint32_t> session = std::nullopt);

  Reply request(const Command& cmd);

  std::uint64_t attempts() const { return attempts_; }

 private:
  Transport& transport_;
  ClientOptions options_;
  std::uint32_t session_;
  std::uint64_t next_seq_ = 1;
  std::uint64_t attempts_ = 0;
};

}  // namespace tagnav::link
