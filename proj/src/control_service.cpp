#include "tagnav/control_service.hpp"

#include <httplib.h>
#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <cctype>
#include <fstream>

#include "tagnav/error.hpp"

namespace tagnav {

using nlohmann::json;

MissionConfig MissionRequest::to_config() const {
  MissionConfig cfg;
  cfg.tag_size_m = tag_size_m;
  cfg.max_altitude_m = max_altitude_m;
  cfg.standoff_m = standoff_m;
  cfg.altitude_step_m = altitude_step_m;
  cfg.validate();
  return cfg;
}

MissionRequest parse_mission_request(const std::string& body) {
  json j;
  try {
    j = json::parse(body);
  } catch (const json::exception& e) {
    throw FormatError(std::string("request body is not JSON: ") + e.what());
  }
  if (!j.is_object()) throw FormatError("request body must be a JSON object");
  static const std::vector<std::string> known = {"tag_size_m",      "max_altitude_m", "standoff_m",
                                                 "altitude_step_m", "world_ref",      "seed"};
  for (const auto& [key, _] : j.items()) {
    if (std::find(known.begin(), known.end(), key) == known.end()) {
      throw InvalidArgument("unknown field '" + key + "'");
    }
  }
  if (!j.contains("tag_size_m")) throw InvalidArgument("tag_size_m is required");
  auto number = [&](const char* key, double fallback) {
    if (!j.contains(key) || j[key].is_null()) return fallback;
    if (!j[key].is_number()) throw InvalidArgument(std::string(key) + " must be a number");
    return j[key].get<double>();
  };
  MissionRequest r;
  r.tag_size_m = number("tag_size_m", 0.0);
  r.max_altitude_m = number("max_altitude_m", r.max_altitude_m);
  r.standoff_m = number("standoff_m", r.standoff_m);
  r.altitude_step_m = number("altitude_step_m", r.altitude_step_m);
  if (j.contains("world_ref") && !j["world_ref"].is_null()) {
    if (!j["world_ref"].is_string()) throw InvalidArgument("world_ref must be a string");
    r.world_ref = j["world_ref"].get<std::string>();
  }
  if (j.contains("seed") && !j["seed"].is_null()) {
    if (!j["seed"].is_number_unsigned()) throw InvalidArgument("seed must be a non-negative integer");
    r.seed = j["seed"].get<std::uint64_t>();
  }
  return r;
}

Trajectory trajectory_from_log(const std::vector<LogRecord>& records, const DronePose& start) {
  Trajectory out;
  out.points.push_back({0.0, start});
  for (const auto& r : records) {
    out.points.push_back({r.t, r.drone});
    if (r.pose) {
      const Eigen::Vector3d drone(r.drone.x, r.drone.y, r.drone.z);
      out.markers.push_back({r.t, drone + camera_to_world(r.drone.yaw) * r.pose->translation});
    }
  }
  return out;
}

std::string_view stream_event_name(StreamEvent::Kind k) {
  switch (k) {
    case StreamEvent::Kind::Telemetry: return "telemetry";
    case StreamEvent::Kind::Message: return "message";
    case StreamEvent::Kind::Phase: return "phase";
  }
  return "message";
}

// ---------------------------------------------------------------- EventHub

std::optional<StreamEvent> EventHub::Subscription::next(std::chrono::milliseconds timeout) {
  std::unique_lock lock(mutex_);
  cv_.wait_for(lock, timeout, [&] { return closed_ || !queue_.empty(); });
  if (queue_.empty()) return std::nullopt;
  StreamEvent e = std::move(queue_.front());
  queue_.pop_front();
  return e;
}

bool EventHub::Subscription::closed() const {
  std::lock_guard lock(mutex_);
  return closed_;
}

std::size_t EventHub::Subscription::dropped() const {
  std::lock_guard lock(mutex_);
  return dropped_;
}

void EventHub::Subscription::push(const StreamEvent& e, std::size_t capacity) {
  {
    std::lock_guard lock(mutex_);
    if (closed_) return;
    if (queue_.size() >= capacity) {
      const auto telemetry = std::find_if(queue_.begin(), queue_.end(), [](const StreamEvent& q) {
        return q.kind == StreamEvent::Kind::Telemetry;
      });
      if (telemetry != queue_.end()) {
        queue_.erase(telemetry);
        ++dropped_;
      } else if (e.kind == StreamEvent::Kind::Telemetry) {
        ++dropped_;
        return;
      }
    }
    queue_.push_back(e);
  }
  cv_.notify_one();
}

void EventHub::Subscription::close() {
  {
    std::lock_guard lock(mutex_);
    closed_ = true;
  }
  cv_.notify_all();
}

std::shared_ptr<EventHub::Subscription> EventHub::subscribe() {
  auto s = std::make_shared<Subscription>();
  std::lock_guard lock(mutex_);
  if (closed_) {
    s->close();
  } else {
    subs_.push_back(s);
  }
  return s;
}

void EventHub::unsubscribe(const std::shared_ptr<Subscription>& s) {
  std::lock_guard lock(mutex_);
  std::erase(subs_, s);
}

void EventHub::publish(const StreamEvent& e) {
  std::lock_guard lock(mutex_);
  for (const auto& s : subs_) s->push(e, capacity_);
}

void EventHub::close() {
  std::lock_guard lock(mutex_);
  closed_ = true;
  for (const auto& s : subs_) s->close();
  subs_.clear();
}

std::size_t EventHub::subscribers() const {
  std::lock_guard lock(mutex_);
  return subs_.size();
}

// ---------------------------------------------------------- MissionService

struct MissionService::Mission {
  std::string id;
  WorldFile world;
  DronePose start_pose;

  std::unique_ptr<Simulator> sim;
  std::unique_ptr<link::LinkServer> server;
  std::unique_ptr<link::LoopbackTransport> transport;
  std::unique_ptr<link::LinkClient> client;
  std::unique_ptr<SimDetector> detector;
  std::unique_ptr<SimClock> clock;
  std::unique_ptr<MissionRunner> runner;

  mutable std::mutex mutex;
  std::condition_variable done_cv;
  std::vector<LogRecord> records;
  std::vector<EventMessage> messages;
  Phase last_phase = Phase::Idle;
  bool done = false;
  Phase final_phase = Phase::Idle;
  std::ofstream file;

  std::mutex pace_mutex;
  std::condition_variable pace_cv;
  bool cancel_pacing = false;

  std::jthread thread;  // last: joined before the members above go away

  void pace(double seconds) {
    if (!(seconds > 0.0)) return;
    std::unique_lock lock(pace_mutex);
    pace_cv.wait_for(lock, std::chrono::duration<double>(seconds), [&] { return cancel_pacing; });
  }

  void shutdown() {
    if (runner) runner->stop("service shutting down");
    {
      std::lock_guard lock(pace_mutex);
      cancel_pacing = true;
    }
    pace_cv.notify_all();
    if (thread.joinable()) thread.join();
  }
};

namespace {

std::string lowercase(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return std::tolower(c); });
  return out;
}

bool valid_id(const std::string& id) {
  return !id.empty() && std::all_of(id.begin(), id.end(), [](unsigned char c) { return std::isalnum(c) || c == '-'; });
}

}  // namespace

MissionService::MissionService(ServiceOptions options) : options_(std::move(options)) {
  if (!(options_.time_scale >= 0.0)) throw InvalidArgument("time scale must be non-negative");
  if (!(options_.telemetry_rate_hz > 0.0)) throw InvalidArgument("telemetry rate must be positive");
  idle_world_ = resolve_world(options_.default_world);
  std::filesystem::create_directories(options_.data_dir);
  // Continue numbering after missions persisted by an earlier run.
  for (const auto& entry : std::filesystem::directory_iterator(options_.data_dir)) {
    const std::string stem = entry.path().stem().string();
    if (entry.path().extension() == ".jsonl" && stem.rfind("mission-", 0) == 0) {
      try {
        counter_ = std::max<std::uint64_t>(counter_, std::stoull(stem.substr(8)));
      } catch (const std::exception&) {
      }
    }
  }
  telemetry_thread_ = std::jthread([this](std::stop_token st) { telemetry_loop(st); });
}

MissionService::~MissionService() {
  telemetry_thread_.request_stop();
  if (telemetry_thread_.joinable()) telemetry_thread_.join();
  std::vector<std::shared_ptr<Mission>> all;
  {
    std::lock_guard lock(mutex_);
    for (auto& [_, m] : missions_) all.push_back(m);
  }
  for (auto& m : all) m->shutdown();
  hub_.close();
}

WorldFile MissionService::resolve_world(const std::string& ref) const {
  const std::string name = ref.empty() ? options_.default_world : ref;
  const std::filesystem::path p(name);
  if (p.has_parent_path() || name == "." || name == "..") {
    throw InvalidArgument("world_ref must be a plain file name");
  }
  const auto full = options_.worlds_dir / p;
  if (!std::filesystem::is_regular_file(full)) throw InvalidArgument("unknown world '" + name + "'");
  try {
    return load_world(full.string());
  } catch (const FormatError& e) {
    throw InvalidArgument(std::string("world '") + name + "' is malformed: " + e.what());
  }
}

std::string MissionService::next_id() {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "mission-%04llu", static_cast<unsigned long long>(++counter_));
  return buf;
}

std::string MissionService::start(const MissionRequest& req) {
  const MissionConfig cfg = req.to_config();
  WorldFile wf = resolve_world(req.world_ref);
  if (req.seed) wf.sim.rng_seed = *req.seed;

  std::lock_guard lock(mutex_);
  if (current_) {
    std::lock_guard ml(current_->mutex);
    if (!current_->done) throw Conflict("mission " + current_->id + " is still running");
  }

  auto m = std::make_shared<Mission>();
  m->id = next_id();
  m->world = wf;
  m->sim = std::make_unique<Simulator>(wf.world, wf.sim);
  m->start_pose = {wf.world.start_position.x(), wf.world.start_position.y(), wf.world.start_position.z(),
                   wf.world.start_yaw_rad};
  m->server = std::make_unique<link::LinkServer>(*m->sim);
  m->transport = std::make_unique<link::LoopbackTransport>(*m->server, options_.loss);
  m->client = std::make_unique<link::LinkClient>(*m->transport, link::ClientOptions{std::chrono::milliseconds{50}, 20});
  m->detector = std::make_unique<SimDetector>(*m->server);
  m->clock = std::make_unique<SimClock>(*m->server);
  m->file.open(options_.data_dir / (m->id + ".jsonl"));
  if (!m->file) throw FormatError("cannot create the mission log in " + options_.data_dir.string());

  const double scale = options_.time_scale;
  Mission* raw = m.get();
  m->server->set_pacer([raw, scale](double s) { raw->pace(s * scale); });

  MissionObserver obs;
  obs.on_record = [this, raw](const LogRecord& r) {
    bool changed = false;
    {
      std::lock_guard ml(raw->mutex);
      raw->records.push_back(r);
      raw->file << to_json_line(r) << '\n' << std::flush;
      changed = r.phase != raw->last_phase;
      raw->last_phase = r.phase;
    }
    if (changed) publish_phase(raw->id, r);
  };
  obs.on_message = [this, raw](Severity s, const std::string& text) {
    EventMessage msg{raw->clock->now(), s, text};
    {
      std::lock_guard ml(raw->mutex);
      if (!raw->messages.empty()) msg.timestamp = std::max(msg.timestamp, raw->messages.back().timestamp);
      raw->messages.push_back(msg);
    }
    publish_message(raw->id, msg);
  };
  m->runner = std::make_unique<MissionRunner>(cfg, *m->client, *m->detector, *m->clock, sim_pose_probe(*m->server),
                                              std::move(obs));

  missions_[m->id] = m;
  current_ = m;
  m->thread = std::jthread([this, raw] {
    Phase final_phase = Phase::Aborted;
    try {
      final_phase = raw->runner->run().final_phase;
    } catch (const std::exception& e) {
      publish_message(raw->id, {raw->clock->now(), Severity::Error, std::string("mission failed: ") + e.what()});
    }
    {
      std::lock_guard ml(raw->mutex);
      raw->done = true;
      raw->final_phase = final_phase;
      raw->file.close();
    }
    raw->done_cv.notify_all();
  });
  return m->id;
}

std::shared_ptr<MissionService::Mission> MissionService::find(const std::string& id) const {
  {
    std::lock_guard lock(mutex_);
    if (const auto it = missions_.find(id); it != missions_.end()) return it->second;
  }
  if (!valid_id(id)) throw NotFound("unknown mission '" + id + "'");
  const auto path = options_.data_dir / (id + ".jsonl");
  std::ifstream in(path);
  if (!in) throw NotFound("unknown mission '" + id + "'");
  // A mission persisted by an earlier service run.
  auto m = std::make_shared<Mission>();
  m->id = id;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty()) m->records.push_back(parse_log_line(line));
  }
  if (!m->records.empty()) {
    m->start_pose = m->records.front().drone;
    m->final_phase = m->records.back().phase;
  }
  m->done = true;
  return m;
}

StopAck MissionService::stop(const std::string& id) {
  const auto m = find(id);
  {
    std::lock_guard ml(m->mutex);
    if (m->done) return {false, m->final_phase};
  }
  return m->runner->stop("stop requested by operator");
}

TelemetrySnapshot MissionService::telemetry() const {
  std::shared_ptr<Mission> m;
  {
    std::lock_guard lock(mutex_);
    m = current_;
  }
  TelemetrySnapshot t;
  if (!m) {
    const auto& w = idle_world_.world;
    t.pose = {w.start_position.x(), w.start_position.y(), w.start_position.z(), w.start_yaw_rad};
    return t;
  }
  const TelemetryFrame f = m->server->telemetry();
  const DroneState s = m->server->state();
  t.time_s = f.time_s;
  t.height_m = f.height_m;
  t.battery_pct = f.battery_pct;
  t.phase = m->runner->phase();
  t.pose = {s.position.x(), s.position.y(), s.position.z(), s.yaw};
  return t;
}

Trajectory MissionService::trajectory(const std::string& id) const {
  const auto m = find(id);
  std::lock_guard ml(m->mutex);
  if (!m->runner && !m->records.empty()) {
    // Reloaded from disk: the first record already carries the start pose.
    auto tr = trajectory_from_log({m->records.begin() + 1, m->records.end()}, m->records.front().drone);
    tr.points.front().t = m->records.front().t;
    return tr;
  }
  return trajectory_from_log(m->records, m->start_pose);
}

std::vector<LogRecord> MissionService::records(const std::string& id) const {
  const auto m = find(id);
  std::lock_guard ml(m->mutex);
  return m->records;
}

std::vector<EventMessage> MissionService::messages(const std::string& id) const {
  const auto m = find(id);
  std::lock_guard ml(m->mutex);
  return m->messages;
}

Phase MissionService::wait(const std::string& id) {
  const auto m = find(id);
  std::unique_lock ml(m->mutex);
  m->done_cv.wait(ml, [&] { return m->done; });
  return m->final_phase;
}

bool MissionService::active() const {
  std::lock_guard lock(mutex_);
  if (!current_) return false;
  std::lock_guard ml(current_->mutex);
  return !current_->done;
}

void MissionService::telemetry_loop(std::stop_token st) {
  const auto period = std::chrono::duration<double>(1.0 / options_.telemetry_rate_hz);
  std::mutex mu;
  std::condition_variable_any cv;
  while (!st.stop_requested()) {
    if (hub_.subscribers() > 0) hub_.publish({StreamEvent::Kind::Telemetry, telemetry_json(telemetry())});
    std::unique_lock lock(mu);
    cv.wait_for(lock, st, period, [] { return false; });
  }
}

void MissionService::publish_phase(const std::string& id, const LogRecord& r) {
  json j{{"mission_id", id}, {"phase", phase_name(r.phase)}, {"t", r.t}};
  hub_.publish({StreamEvent::Kind::Phase, j.dump()});
}

void MissionService::publish_message(const std::string& id, const EventMessage& m) {
  json j{{"mission_id", id}, {"timestamp", m.timestamp}, {"severity", severity_name(m.severity)}, {"text", m.text}};
  hub_.publish({StreamEvent::Kind::Message, j.dump()});
}

std::string telemetry_json(const TelemetrySnapshot& t) {
  json j{{"t", t.time_s},
         {"height_m", t.height_m},
         {"battery_pct", t.battery_pct},
         {"phase", phase_name(t.phase)},
         {"x", t.pose.x},
         {"y", t.pose.y},
         {"z", t.pose.z},
         {"yaw", t.pose.yaw}};
  return j.dump();
}

std::string trajectory_json(const Trajectory& t) {
  json points = json::array();
  for (const auto& p : t.points) {
    points.push_back({{"t", p.t}, {"x", p.pose.x}, {"y", p.pose.y}, {"z", p.pose.z}, {"yaw", p.pose.yaw}});
  }
  json markers = json::array();
  for (const auto& m : t.markers) {
    markers.push_back({{"t", m.t}, {"x", m.position.x()}, {"y", m.position.y()}, {"z", m.position.z()}});
  }
  return json{{"points", points}, {"markers", markers}}.dump();
}

// -------------------------------------------------------------- HttpServer

struct HttpServer::Impl {
  MissionService& service;
  httplib::Server server;
  std::thread thread;
  std::atomic<bool> stopping{false};

  explicit Impl(MissionService& s) : service(s) {}
};

namespace {

void reply_json(httplib::Response& res, int status, const json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

void reply_error(httplib::Response& res, int status, const std::string& message) {
  reply_json(res, status, json{{"error", message}});
}

}  // namespace

HttpServer::HttpServer(MissionService& service) : impl_(std::make_unique<Impl>(service)) {
  auto& srv = impl_->server;
  MissionService& svc = service;
  Impl* impl = impl_.get();

  srv.Post("/api/missions", [&svc](const httplib::Request& req, httplib::Response& res) {
    try {
      const std::string id = svc.start(parse_mission_request(req.body));
      reply_json(res, 201, json{{"mission_id", id}});
    } catch (const Conflict& e) {
      reply_error(res, 409, e.what());
    } catch (const InvalidArgument& e) {
      reply_error(res, 400, e.what());
    } catch (const FormatError& e) {
      reply_error(res, 400, e.what());
    }
  });

  srv.Post(R"(/api/missions/([A-Za-z0-9-]+)/stop)", [&svc](const httplib::Request& req, httplib::Response& res) {
    try {
      const auto ack = svc.stop(req.matches[1]);
      const bool finished = is_terminal(ack.phase) && !ack.was_running;
      reply_json(res, 200, json{{"status", finished ? lowercase(phase_name(ack.phase)) : "landing"}});
    } catch (const NotFound& e) {
      reply_error(res, 404, e.what());
    }
  });

  srv.Get("/api/telemetry", [&svc](const httplib::Request&, httplib::Response& res) {
    const auto t = svc.telemetry();
    reply_json(res, 200,
               json{{"height_m", t.height_m}, {"battery_pct", t.battery_pct}, {"phase", phase_name(t.phase)}});
  });

  srv.Get(R"(/api/missions/([A-Za-z0-9-]+)/trajectory)", [&svc](const httplib::Request& req, httplib::Response& res) {
    try {
      res.status = 200;
      res.set_content(trajectory_json(svc.trajectory(req.matches[1])), "application/json");
    } catch (const NotFound& e) {
      reply_error(res, 404, e.what());
    } catch (const FormatError& e) {
      reply_error(res, 500, e.what());
    }
  });

  srv.Get("/api/stream", [&svc, impl](const httplib::Request&, httplib::Response& res) {
    auto sub = svc.hub().subscribe();
    res.set_header("Cache-Control", "no-cache");
    res.set_chunked_content_provider(
        "text/event-stream",
        [sub, impl](std::size_t, httplib::DataSink& sink) {
          if (impl->stopping.load() || sub->closed()) {
            sink.done();
            return true;
          }
          std::string chunk;
          if (auto e = sub->next(std::chrono::milliseconds{250})) {
            chunk = "event: " + std::string(stream_event_name(e->kind)) + "\ndata: " + e->json + "\n\n";
          } else {
            chunk = ": keep-alive\n\n";
          }
          return sink.write(chunk.data(), chunk.size());
        },
        [&svc, sub](bool) { svc.hub().unsubscribe(sub); });
  });
}

HttpServer::~HttpServer() { stop(); }

int HttpServer::start(const std::string& host, int port) {
  auto& srv = impl_->server;
  if (port == 0) {
    port_ = srv.bind_to_any_port(host);
    if (port_ <= 0) throw Error("cannot bind an HTTP port on " + host);
  } else {
    if (!srv.bind_to_port(host, port)) throw Error("cannot bind " + host + ":" + std::to_string(port));
    port_ = port;
  }
  impl_->thread = std::thread([&srv] { srv.listen_after_bind(); });
  srv.wait_until_ready();
  return port_;
}

void HttpServer::stop() {
  if (!impl_) return;
  impl_->stopping.store(true);
  impl_->server.stop();
  if (impl_->thread.joinable()) impl_->thread.join();
}

}  // namespace tagnav
