#include "tagnav/drone_link.hpp"

#include <cmath>
#include <numbers>

#include "tagnav/error.hpp"
#include "text_util.hpp"

namespace tagnav::link {
namespace {

struct VerbName {
  Verb verb;
  std::string_view name;
};

constexpr VerbName kVerbs[] = {
    {Verb::Command, "command"}, {Verb::Takeoff, "takeoff"},   {Verb::Land, "land"},
    {Verb::Go, "go"},           {Verb::Cw, "cw"},             {Verb::Ccw, "ccw"},
    {Verb::Battery, "battery?"}, {Verb::Height, "height?"},   {Verb::Speed, "speed?"},
    {Verb::Orientation, "orientation?"}, {Verb::Stop, "stop"},
};

std::string_view verb_name(Verb v) {
  for (const auto& e : kVerbs) {
    if (e.verb == v) return e.name;
  }
  return "?";
}

std::vector<std::string_view> split_single_space(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = s.find(' ', start);
    out.push_back(s.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

int int_arg(std::string_view token, int lo, int hi) {
  const auto v = detail::parse_int(token);
  if (!v || token.empty() || token.front() == '+') {
    throw ParseError("bad integer argument '" + std::string(token) + "'");
  }
  if (*v < lo || *v > hi) {
    throw ParseError("argument '" + std::string(token) + "' out of range [" + std::to_string(lo) + ", " +
                     std::to_string(hi) + "]");
  }
  return static_cast<int>(*v);
}

std::string_view strip_newline(std::string_view s) {
  while (!s.empty() && (s.back() == '\n' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

int round_to_int(double v) { return static_cast<int>(std::lround(v)); }

}  // namespace

bool Command::is_query() const {
  return verb == Verb::Battery || verb == Verb::Height || verb == Verb::Speed || verb == Verb::Orientation;
}

std::string encode(const Command& cmd) {
  std::string out(verb_name(cmd.verb));
  switch (cmd.verb) {
    case Verb::Go:
      out += ' ' + std::to_string(cmd.x_cm) + ' ' + std::to_string(cmd.y_cm) + ' ' + std::to_string(cmd.z_cm);
      break;
    case Verb::Cw:
    case Verb::Ccw:
      out += ' ' + std::to_string(cmd.degrees);
      break;
    default:
      break;
  }
  return out;
}

Command parse(std::string_view line) {
  line = strip_newline(line);
  if (line.empty()) throw ParseError("empty command");
  const auto tokens = split_single_space(line);
  for (const auto& t : tokens) {
    if (t.empty()) throw ParseError("stray whitespace in '" + std::string(line) + "'");
  }
  const auto verb_token = tokens.front();
  const VerbName* match = nullptr;
  for (const auto& e : kVerbs) {
    if (e.name == verb_token) match = &e;
  }
  if (match == nullptr) throw ParseError("unknown verb '" + std::string(verb_token) + "'");

  auto expect_args = [&](std::size_t n) {
    if (tokens.size() != n + 1) {
      throw ParseError("'" + std::string(verb_token) + "' takes " + std::to_string(n) + " argument(s)");
    }
  };

  Command cmd = Command::simple(match->verb);
  switch (match->verb) {
    case Verb::Go:
      expect_args(3);
      cmd.x_cm = int_arg(tokens[1], -kMaxGoCm, kMaxGoCm);
      cmd.y_cm = int_arg(tokens[2], -kMaxGoCm, kMaxGoCm);
      cmd.z_cm = int_arg(tokens[3], -kMaxGoCm, kMaxGoCm);
      if (cmd.x_cm == 0 && cmd.y_cm == 0 && cmd.z_cm == 0) throw ParseError("zero-length 'go'");
      break;
    case Verb::Cw:
    case Verb::Ccw:
      expect_args(1);
      cmd.degrees = int_arg(tokens[1], 1, kMaxTurnDeg);
      break;
    default:
      expect_args(0);
      break;
  }
  return cmd;
}

std::optional<Command> go_from_meters(const DroneVector& v) {
  const double cm[3] = {v.forward * 100.0, v.right * 100.0, v.down * 100.0};
  for (double c : cm) {
    if (!std::isfinite(c) || std::abs(std::round(c)) > kMaxGoCm) {
      throw InvalidArgument("move component exceeds the per-command range");
    }
  }
  const Command cmd = Command::go(round_to_int(cm[0]), round_to_int(cm[1]), round_to_int(cm[2]));
  if (cmd.x_cm == 0 && cmd.y_cm == 0 && cmd.z_cm == 0) return std::nullopt;
  return cmd;
}

DroneVector meters_from_go(const Command& cmd) {
  return {cmd.x_cm / 100.0, cmd.y_cm / 100.0, cmd.z_cm / 100.0};
}

std::optional<Command> turn_from_radians(double theta_cw) {
  const int deg = round_to_int(normalize_angle(theta_cw) * 180.0 / std::numbers::pi);
  if (deg == 0) return std::nullopt;
  return deg > 0 ? Command::cw(deg) : Command::ccw(-deg);
}

double radians_from_turn(const Command& cmd) {
  const double rad = cmd.degrees * std::numbers::pi / 180.0;
  return cmd.verb == Verb::Ccw ? -rad : rad;
}

std::string encode(const Reply& reply) {
  std::string out;
  switch (reply.kind) {
    case Reply::Kind::Ok:
      out = "ok";
      break;
    case Reply::Kind::Error:
      out = "error " + reply.text;
      break;
    case Reply::Kind::Value:
      out = reply.text;
      break;
  }
  for (auto& c : out) {
    if (static_cast<unsigned char>(c) > 0x7e || c == '\n' || c == '\r') c = '?';
  }
  if (out.size() > kMaxReplyBytes) out.resize(kMaxReplyBytes);
  return out;
}

Reply parse_reply(std::string_view line) {
  line = strip_newline(line);
  if (line == "ok") return Reply::ok();
  if (line == "error") return Reply::error("");
  if (line.starts_with("error ")) return Reply::error(std::string(line.substr(6)));
  return Reply::value(std::string(line));
}

TelemetryLine TelemetryLine::from(const TelemetryFrame& f) {
  TelemetryLine t;
  t.height_cm = round_to_int(f.height_m * 100.0);
  t.battery_pct = round_to_int(f.battery_pct);
  t.vgx = round_to_int(f.speed.x() * 100.0);
  t.vgy = round_to_int(f.speed.y() * 100.0);
  t.vgz = round_to_int(f.speed.z() * 100.0);
  t.pitch_deg = round_to_int(f.pitch_deg);
  t.roll_deg = round_to_int(f.roll_deg);
  t.yaw_deg = round_to_int(f.yaw_deg);
  return t;
}

std::string format_telemetry(const TelemetryLine& t) {
  return "h:" + std::to_string(t.height_cm) + ";bat:" + std::to_string(t.battery_pct) +
         ";vgx:" + std::to_string(t.vgx) + ";vgy:" + std::to_string(t.vgy) + ";vgz:" + std::to_string(t.vgz) +
         ";pitch:" + std::to_string(t.pitch_deg) + ";roll:" + std::to_string(t.roll_deg) +
         ";yaw:" + std::to_string(t.yaw_deg);
}

TelemetryLine parse_telemetry(std::string_view line) {
  line = strip_newline(line);
  static constexpr std::string_view kKeys[] = {"h", "bat", "vgx", "vgy", "vgz", "pitch", "roll", "yaw"};
  TelemetryLine t;
  int* fields[] = {&t.height_cm, &t.battery_pct, &t.vgx, &t.vgy, &t.vgz, &t.pitch_deg, &t.roll_deg, &t.yaw_deg};
  std::size_t pos = 0;
  for (std::size_t i = 0; i < std::size(kKeys); ++i) {
    const auto end = line.find(';', pos);
    const auto item = line.substr(pos, end == std::string_view::npos ? std::string_view::npos : end - pos);
    const auto colon = item.find(':');
    if (colon == std::string_view::npos || item.substr(0, colon) != kKeys[i]) {
      throw ParseError("telemetry field '" + std::string(item) + "' where '" + std::string(kKeys[i]) +
                       "' was expected");
    }
    const auto v = detail::parse_int(item.substr(colon + 1));
    if (!v) throw ParseError("bad telemetry value '" + std::string(item) + "'");
    *fields[i] = static_cast<int>(*v);
    const bool last = i + 1 == std::size(kKeys);
    if (last != (end == std::string_view::npos)) throw ParseError("telemetry line has wrong field count");
    pos = end + 1;
  }
  return t;
}

std::string encode_frame(const Frame& f) {
  return "#" + std::to_string(f.session) + "-" + std::to_string(f.seq) + " " + f.payload;
}

std::optional<Frame> parse_frame(std::string_view datagram) {
  if (datagram.empty() || datagram.front() != '#') return std::nullopt;
  const auto space = datagram.find(' ');
  if (space == std::string_view::npos) return std::nullopt;
  const auto token = datagram.substr(1, space - 1);
  const auto dash = token.find('-');
  if (dash == std::string_view::npos) return std::nullopt;
  const auto session = detail::parse_int(token.substr(0, dash));
  const auto seq = detail::parse_int(token.substr(dash + 1));
  if (!session || !seq || *session < 0 || *session > 0xffffffffLL || *seq < 0) return std::nullopt;
  return Frame{static_cast<std::uint32_t>(*session), static_cast<std::uint64_t>(*seq),
               std::string(datagram.substr(space + 1))};
}

LinkServer::LinkServer(Simulator& sim) : sim_(sim) {}

std::uint64_t LinkServer::executed() const {
  std::lock_guard lock(mutex_);
  return executed_;
}

Reply LinkServer::execute_locked(const Command& cmd, double& duration) {
  duration = 0.0;
  ++executed_;
  try {
    switch (cmd.verb) {
      case Verb::Command:
      case Verb::Stop:
        return Reply::ok();
      case Verb::Takeoff:
        duration = sim_.takeoff();
        return Reply::ok();
      case Verb::Land:
        duration = sim_.land();
        return Reply::ok();
      case Verb::Go:
        duration = sim_.move(meters_from_go(cmd));
        return Reply::ok();
      case Verb::Cw:
      case Verb::Ccw:
        duration = sim_.turn(radians_from_turn(cmd));
        return Reply::ok();
      case Verb::Battery:
        return Reply::value(std::to_string(round_to_int(sim_.telemetry().battery_pct)));
      case Verb::Height:
        return Reply::value(std::to_string(round_to_int(sim_.telemetry().height_m * 100.0)));
      case Verb::Speed:
        return Reply::value(std::to_string(round_to_int(sim_.telemetry().speed.norm() * 100.0)));
      case Verb::Orientation: {
        const auto t = TelemetryLine::from(sim_.telemetry());
        return Reply::value(std::to_string(t.pitch_deg) + " " + std::to_string(t.roll_deg) + " " +
                            std::to_string(t.yaw_deg));
      }
    }
  } catch (const Error& e) {
    return Reply::error(e.what());
  }
  return Reply::error("unhandled verb");
}

Reply LinkServer::execute(const Command& cmd) {
  double duration = 0.0;
  Reply reply;
  {
    std::lock_guard lock(mutex_);
    reply = execute_locked(cmd, duration);
  }
  if (pacer_ && duration > 0.0) pacer_(duration);
  return reply;
}

std::optional<std::string> LinkServer::handle(std::string_view datagram) {
  const auto frame = parse_frame(datagram);
  const std::string_view payload = frame ? std::string_view(frame->payload) : datagram;

  double duration = 0.0;
  std::string reply_text;
  {
    std::lock_guard lock(mutex_);
    SessionMemory* memory = nullptr;
    if (frame) {
      memory = &sessions_[frame->session];
      if (memory->last_seq != 0 && frame->seq == memory->last_seq) {
        return encode_frame({frame->session, frame->seq, memory->last_reply});
      }
      if (frame->seq < memory->last_seq) return std::nullopt;
    }
    Reply reply;
    try {
      reply = execute_locked(parse(payload), duration);
    } catch (const ParseError& e) {
      reply = Reply::error(e.what());
    }
    reply_text = encode(reply);
    if (memory != nullptr) {
      memory->last_seq = frame->seq;
      memory->last_reply = reply_text;
    }
  }
  if (pacer_ && duration > 0.0) pacer_(duration);
  if (frame) return encode_frame({frame->session, frame->seq, reply_text});
  return reply_text;
}

std::string LinkServer::telemetry_line() const { return format_telemetry(TelemetryLine::from(telemetry())); }

TelemetryFrame LinkServer::telemetry() const {
  std::lock_guard lock(mutex_);
  return sim_.telemetry();
}

DroneState LinkServer::state() const {
  std::lock_guard lock(mutex_);
  return sim_.state();
}

LoopbackTransport::LoopbackTransport(LinkServer& server, LossModel loss)
    : server_(server), loss_(loss), rng_(loss.seed) {}

bool LoopbackTransport::lose() {
  if (loss_.drop_probability <= 0.0) return false;
  std::bernoulli_distribution d(loss_.drop_probability);
  const bool lost = d(rng_);
  dropped_ += lost ? 1 : 0;
  return lost;
}

bool LoopbackTransport::duplicate() {
  if (loss_.duplicate_probability <= 0.0) return false;
  std::bernoulli_distribution d(loss_.duplicate_probability);
  const bool dup = d(rng_);
  duplicated_ += dup ? 1 : 0;
  return dup;
}

void LoopbackTransport::send(std::string_view datagram) {
  const int copies = duplicate() ? 2 : 1;
  for (int i = 0; i < copies; ++i) {
    if (lose()) continue;
    auto reply = server_.handle(datagram);
    if (!reply || lose()) continue;
    inbox_.push_back(std::move(*reply));
  }
}

std::optional<std::string> LoopbackTransport::receive(std::chrono::milliseconds) {
  if (inbox_.empty()) return std::nullopt;
  std::string out = std::move(inbox_.front());
  inbox_.pop_front();
  return out;
}

LinkClient::LinkClient(Transport& transport, ClientOptions options, std::optional<std::uint32_t> session)
    : transport_(transport), options_(options), session_(session ? *session : std::random_device{}()) {
  if (options_.retries < 0) throw InvalidArgument("retries must be non-negative");
}

Reply LinkClient::request(const Command& cmd) {
  const std::uint64_t seq = next_seq_++;
  const std::string datagram = encode_frame({session_, seq, encode(cmd)});
  for (int attempt = 0; attempt <= options_.retries; ++attempt) {
    ++attempts_;
    transport_.send(datagram);
    const auto deadline = std::chrono::steady_clock::now() + options_.timeout;
    while (true) {
      const auto now = std::chrono::steady_clock::now();
      const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - now);
      auto incoming = transport_.receive(std::max(left, std::chrono::milliseconds{0}));
      if (!incoming) break;
      const auto frame = parse_frame(*incoming);
      // Stale answers to earlier attempts or earlier requests are skipped.
      if (frame && frame->session == session_ && frame->seq == seq) return parse_reply(frame->payload);
      if (std::chrono::steady_clock::now() >= deadline) break;
    }
  }
  throw LinkDown("no reply to '" + encode(cmd) + "' after " + std::to_string(options_.retries + 1) +
                 " attempt(s)");
}

}  // namespace tagnav::link
