#include <CLI11.hpp>

#include <atomic>
#include <csignal>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <thread>

#include "tagnav/control_service.hpp"
#include "tagnav/error.hpp"
#include "tagnav/error_analysis.hpp"
#include "tagnav/observation.hpp"
#include "tagnav/udp_transport.hpp"
#include "tagnav/world_io.hpp"

namespace fs = std::filesystem;
using namespace tagnav;

namespace {

std::atomic<bool> g_interrupted{false};

void on_signal(int) { g_interrupted = true; }

void wait_for_interrupt() {
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  while (!g_interrupted) std::this_thread::sleep_for(std::chrono::milliseconds{100});
}

int serve(const std::string& world, const std::string& host, int port, const std::string& data_dir, double time_scale) {
  const fs::path w = fs::absolute(world);
  ServiceOptions opts;
  opts.worlds_dir = w.parent_path();
  opts.default_world = w.filename().string();
  opts.data_dir = data_dir;
  opts.time_scale = time_scale;
  MissionService service(opts);
  HttpServer http(service);
  const int bound = http.start(host, port);
  std::printf("serving on http://%s:%d (world %s)\n", host.c_str(), bound, opts.default_world.c_str());
  std::fflush(stdout);
  wait_for_interrupt();
  http.stop();
  return 0;
}

int sweep(const std::string& world, const std::string& out, const std::string& plot, int trials, std::uint64_t seed,
          double sigma, const std::vector<double>& yaw_deg, double yaw_distance) {
  WorldFile wf = load_world(world);
  if (sigma >= 0.0) wf.world.corner_noise_px_sigma = sigma;
  std::vector<ErrorRecord> records;
  if (yaw_deg.empty()) {
    RangeSweepConfig cfg;
    cfg.trials_per_point = trials;
    cfg.seed = seed;
    const auto res = range_sweep(wf.world, wf.sim.camera, cfg);
    for (const auto& s : res.skipped) {
      std::fprintf(stderr, "skipped %.3f m (trial %d): %s\n", s.distance_m, s.trial, s.reason.c_str());
    }
    records = res.records;
    std::cout << sweep_report(records);
  } else {
    YawSweepConfig cfg;
    cfg.distance_m = yaw_distance;
    for (double d : yaw_deg) cfg.offsets_rad.push_back(d * std::numbers::pi / 180.0);
    cfg.trials = trials;
    cfg.seed = seed;
    const auto res = yaw_sweep(wf.world, wf.sim.camera, cfg);
    records = res.records;
    std::printf("records: %zu, pearson(|offset|, abs error) = %.4f%s\n", records.size(), res.correlation.r,
                res.correlation.degenerate ? " (degenerate)" : "");
  }
  emit_csv(records, out);
  if (!plot.empty()) {
    std::ofstream f(plot);
    if (!f) throw FormatError("cannot open " + plot);
    write_plot_data(f, records);
  }
  return 0;
}

int mission(const MissionRequest& req, const std::string& world, const std::string& log_path, bool udp) {
  const MissionConfig cfg = req.to_config();
  WorldFile wf = load_world(world);
  if (req.seed) wf.sim.rng_seed = *req.seed;
  Simulator sim(wf.world, wf.sim);
  link::LinkServer server(sim);
  SimDetector detector(server);
  SimClock clock(server);

  MissionObserver obs;
  obs.on_message = [](Severity s, const std::string& text) {
    std::printf("[%s] %s\n", std::string(severity_name(s)).c_str(), text.c_str());
  };

  MissionLog log;
  if (udp) {
    link::UdpSocket telemetry;
    telemetry.bind(0);
    link::UdpLinkServer udp_server(server, 0, telemetry.local_port(), wf.sim.telemetry_rate_hz);
    link::UdpClientTransport transport("127.0.0.1", udp_server.command_port());
    link::LinkClient client(transport);
    MissionRunner runner(cfg, client, detector, clock, sim_pose_probe(server), obs);
    log = runner.run();
  } else {
    link::LoopbackTransport transport(server);
    link::LinkClient client(transport);
    MissionRunner runner(cfg, client, detector, clock, sim_pose_probe(server), obs);
    log = runner.run();
  }

  if (!log_path.empty()) {
    std::ofstream f(log_path);
    if (!f) throw FormatError("cannot open " + log_path);
    f << log.to_jsonl();
  }
  std::printf("final phase %s, approaches %d, commands %zu, reason: %s\n",
              std::string(phase_name(log.final_phase)).c_str(), log.approaches, log.commands.size(),
              log.end_reason.c_str());
  for (const auto& h : log.hovers) std::printf("hover x %.4f y %.4f z %.4f yaw %.4f\n", h.x, h.y, h.z, h.yaw);
  return log.final_phase == Phase::Landed ? 0 : 2;
}

int link_server(const std::string& world, int cmd_port, int telemetry_port, bool bind_any) {
  const WorldFile wf = load_world(world);
  Simulator sim(wf.world, wf.sim);
  link::LinkServer server(sim);
  link::UdpLinkServer udp(server, static_cast<std::uint16_t>(cmd_port), static_cast<std::uint16_t>(telemetry_port),
                          wf.sim.telemetry_rate_hz, bind_any);
  std::printf("simulated drone listening on udp %d, telemetry to port %d\n", udp.command_port(), telemetry_port);
  std::fflush(stdout);
  wait_for_interrupt();
  return 0;
}

int estimate(const std::string& obs_path, const std::string& camera_path, double tag_size) {
  const CameraIntrinsics K = camera_path.empty() ? default_tello_intrinsics() : load_intrinsics(camera_path);
  std::ifstream in(obs_path);
  if (!in) throw FormatError("cannot open " + obs_path);
  int failures = 0;
  for (const auto& obs : read_observations(in)) {
    try {
      const TagPose p = estimate_tag_pose(obs, K, tag_size);
      const auto& t = p.translation;
      std::printf("tag %d distance_m %.4f t %.4f %.4f %.4f rms_px %.2e\n", obs.tag_id, distance_estimate(t), t.x(),
                  t.y(), t.z(), reprojection_error_rms(p, obs, K, tag_size));
    } catch (const Error& e) {
      std::printf("tag %d failed: %s\n", obs.tag_id, e.what());
      ++failures;
    }
  }
  return failures == 0 ? 0 : 2;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"tagnav: marker-based indoor drone positioning"};
  app.require_subcommand(1);

  auto* serve_cmd = app.add_subcommand("serve", "run the HTTP control service over a simulated drone");
  std::string serve_world = "worlds/one_tag.json", host = "127.0.0.1", data_dir = "missions";
  int port = 8080;
  double time_scale = 1.0;
  serve_cmd->add_option("--world", serve_world, "default world file")->check(CLI::ExistingFile);
  serve_cmd->add_option("--port", port, "HTTP port (0 picks a free one)");
  serve_cmd->add_option("--host", host, "bind address");
  serve_cmd->add_option("--data-dir", data_dir, "directory for mission logs");
  serve_cmd->add_option("--time-scale", time_scale, "real seconds per simulated second (0 = unpaced)");

  auto* sweep_cmd = app.add_subcommand("sweep", "distance error sweep without the service");
  std::string sweep_world = "worlds/one_tag_noisy.json", out = "sweep.csv", plot;
  int trials = 20;
  std::uint64_t seed = 1;
  double sigma = -1.0, yaw_distance = 3.0;
  std::vector<double> yaw_deg;
  sweep_cmd->add_option("--world", sweep_world, "single-tag world file")->check(CLI::ExistingFile);
  sweep_cmd->add_option("--out", out, "CSV output path");
  sweep_cmd->add_option("--plot-data", plot, "CSV with binned medians appended");
  sweep_cmd->add_option("--trials", trials, "trials per distance (range) or total records (yaw)");
  sweep_cmd->add_option("--seed", seed, "noise seed");
  sweep_cmd->add_option("--sigma", sigma, "override corner noise in pixels");
  sweep_cmd->add_option("--yaw-deg", yaw_deg, "run the yaw study with these tag offsets")->delimiter(',');
  sweep_cmd->add_option("--distance", yaw_distance, "distance for the yaw study");

  auto* mission_cmd = app.add_subcommand("mission", "fly one headless mission in the simulator");
  MissionRequest req;
  std::string mission_world = "worlds/one_tag.json", log_path;
  bool udp = false;
  std::uint64_t mission_seed = 0;
  mission_cmd->add_option("--tag-size", req.tag_size_m, "marker side length in metres")->required();
  mission_cmd->add_option("--max-alt", req.max_altitude_m, "maximum search altitude in metres");
  mission_cmd->add_option("--standoff", req.standoff_m, "distance kept in front of the marker");
  mission_cmd->add_option("--alt-step", req.altitude_step_m, "climb between search levels");
  mission_cmd->add_option("--world", mission_world, "world file")->check(CLI::ExistingFile);
  auto* seed_opt = mission_cmd->add_option("--seed", mission_seed, "override the world seed");
  mission_cmd->add_option("--log", log_path, "write the JSONL mission log here");
  mission_cmd->add_flag("--udp", udp, "talk to the simulator over localhost UDP");

  auto* link_cmd = app.add_subcommand("link", "expose a simulated drone on the UDP text protocol");
  std::string link_world = "worlds/one_tag.json";
  int cmd_port = 8889, telemetry_port = 8890;
  bool bind_any = false;
  link_cmd->add_option("--world", link_world, "world file")->check(CLI::ExistingFile);
  link_cmd->add_option("--port", cmd_port, "command port");
  link_cmd->add_option("--telemetry-port", telemetry_port, "telemetry destination port");
  link_cmd->add_flag("--any", bind_any, "listen on all interfaces");

  auto* est_cmd = app.add_subcommand("estimate", "estimate tag poses from recorded corner observations");
  std::string obs_path, camera_path;
  double tag_size = 0.184;
  est_cmd->add_option("--obs", obs_path, "observation file")->required()->check(CLI::ExistingFile);
  est_cmd->add_option("--camera", camera_path, "intrinsics file")->check(CLI::ExistingFile);
  est_cmd->add_option("--tag-size", tag_size, "marker side length in metres");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*serve_cmd) return serve(serve_world, host, port, data_dir, time_scale);
    if (*sweep_cmd) return sweep(sweep_world, out, plot, trials, seed, sigma, yaw_deg, yaw_distance);
    if (*mission_cmd) {
      if (*seed_opt) req.seed = mission_seed;
      return mission(req, mission_world, log_path, udp);
    }
    if (*link_cmd) return link_server(link_world, cmd_port, telemetry_port, bind_any);
    if (*est_cmd) return estimate(obs_path, camera_path, tag_size);
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
