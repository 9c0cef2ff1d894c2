#include "tagnav/error_analysis.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>

#include "tagnav/error.hpp"
#include "tagnav/tag_pose.hpp"
#include "text_util.hpp"

namespace tagnav {

double distance_estimate(const Eigen::Vector3d& t) { return t.norm(); }

DistanceErrors errors(double est, double ref) {
  if (!(ref > 0.0) || !std::isfinite(ref)) throw InvalidArgument("reference distance must be positive");
  if (!std::isfinite(est)) throw InvalidArgument("estimated distance must be finite");
  const double abs = std::abs(est - ref);
  return {abs, abs / ref};
}

Correlation pearson(const std::vector<double>& xs, const std::vector<double>& ys) {
  if (xs.size() != ys.size()) throw InvalidArgument("pearson: sequences differ in length");
  const std::size_t n = xs.size();
  if (n < 2) return {0.0, true};
  const double mx = std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(n);
  const double my = std::accumulate(ys.begin(), ys.end(), 0.0) / static_cast<double>(n);
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double dx = xs[i] - mx;
    const double dy = ys[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  // Relative threshold so that sequences equal up to rounding count as constant.
  const auto flat = [n](double s, double m) { return s <= 1e-24 * static_cast<double>(n) * std::max(1.0, m * m); };
  if (flat(sxx, mx) || flat(syy, my)) return {0.0, true};
  return {std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0), false};
}

namespace {

std::vector<double> average_ranks(const std::vector<double>& v) {
  std::vector<std::size_t> idx(v.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> ranks(v.size());
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i;
    while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
    const double r = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[idx[k]] = r;
    i = j + 1;
  }
  return ranks;
}

}  // namespace

Correlation spearman(const std::vector<double>& xs, const std::vector<double>& ys) {
  if (xs.size() != ys.size()) throw InvalidArgument("spearman: sequences differ in length");
  return pearson(average_ranks(xs), average_ranks(ys));
}

double percentile(std::vector<double> v, double q) {
  if (v.empty()) throw InvalidArgument("percentile of an empty set");
  if (!(q >= 0.0 && q <= 1.0)) throw InvalidArgument("percentile outside [0, 1]");
  std::sort(v.begin(), v.end());
  const double pos = q * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

double median(std::vector<double> v) { return percentile(std::move(v), 0.5); }

std::vector<double> RangeSweepConfig::default_distances() {
  std::vector<double> d;
  for (int i = 28; i >= 2; --i) d.push_back(0.25 * i);
  return d;
}

namespace {

const TagSpec& single_tag(const WorldModel& world) {
  if (world.tags.size() != 1) throw InvalidArgument("sweeps need a world with exactly one tag");
  return world.tags.front();
}

/// Horizontal unit direction a viewer looks along to see the tag squarely.
Eigen::Vector3d viewing_direction(const TagSpec& tag) {
  Eigen::Vector3d f = tag.world_rotation() * Eigen::Vector3d::UnitZ();
  f.z() = 0.0;
  if (f.norm() < 1e-9) throw InvalidArgument("tag faces straight up or down");
  return f.normalized();
}

double yaw_of_heading(const Eigen::Vector3d& dir) { return std::atan2(-dir.y(), dir.x()); }

struct Measurement {
  std::optional<ErrorRecord> record;
  std::string reason;
};

Measurement measure(Simulator& sim, const TagSpec& tag, const CameraIntrinsics& K) {
  const auto seen = sim.observe_tags();
  const auto it = std::find_if(seen.begin(), seen.end(), [&](const TagObservation& o) { return o.tag_id == tag.id; });
  if (it == seen.end()) return {std::nullopt, "tag not visible"};
  TagPose pose;
  try {
    pose = estimate_tag_pose(*it, K, tag.size_m);
  } catch (const Error& e) {
    return {std::nullopt, std::string("pose estimation failed: ") + e.what()};
  }
  ErrorRecord r;
  r.ref_distance_m = sim.rangefinder(tag.id);
  r.est_distance_m = distance_estimate(pose.translation);
  const auto e = errors(r.est_distance_m, r.ref_distance_m);
  r.abs_error_m = e.abs;
  r.rel_error = e.rel;
  return {r, {}};
}

}  // namespace

RangeSweepResult range_sweep(const WorldModel& world, const CameraIntrinsics& K, const RangeSweepConfig& cfg) {
  world.validate();
  K.validate();
  if (cfg.trials_per_point < 1) throw InvalidArgument("trials_per_point must be at least 1");
  for (std::size_t i = 0; i < cfg.distances_m.size(); ++i) {
    if (!(cfg.distances_m[i] > 0.0)) throw InvalidArgument("sweep distances must be positive");
    if (i > 0 && cfg.distances_m[i] > cfg.distances_m[i - 1]) {
      throw InvalidArgument("sweep distances must be in descending order");
    }
  }
  const TagSpec& tag = single_tag(world);
  const Eigen::Vector3d dir = viewing_direction(tag);
  const double yaw = yaw_of_heading(dir);

  SimConfig sc;
  sc.camera = K;
  Simulator sim(world, sc);

  RangeSweepResult out;
  for (int trial = 0; trial < cfg.trials_per_point; ++trial) {
    std::optional<double> previous_abs;
    for (std::size_t i = 0; i < cfg.distances_m.size(); ++i) {
      const double d = cfg.distances_m[i];
      sim.reseed(derive_seed(cfg.seed, static_cast<std::uint64_t>(trial), i));
      sim.place(tag.position - d * dir, yaw);
      auto m = measure(sim, tag, K);
      if (!m.record) {
        out.skipped.push_back({d, trial, std::move(m.reason)});
        continue;
      }
      m.record->trial = trial;
      m.record->regression_flag = previous_abs && m.record->abs_error_m > *previous_abs;
      previous_abs = m.record->abs_error_m;
      out.records.push_back(*m.record);
    }
  }
  return out;
}

YawSweepResult yaw_sweep(const WorldModel& world, const CameraIntrinsics& K, const YawSweepConfig& cfg) {
  world.validate();
  K.validate();
  if (!(cfg.distance_m > 0.0)) throw InvalidArgument("yaw sweep distance must be positive");
  if (cfg.offsets_rad.empty()) throw InvalidArgument("yaw sweep needs at least one offset");
  if (cfg.trials < 1) throw InvalidArgument("yaw sweep trials must be at least 1");
  for (double o : cfg.offsets_rad) {
    if (!std::isfinite(o) || std::abs(o) > world.detect_max_view_angle_rad) {
      throw InvalidArgument("yaw offset " + detail::format_double(o) + " rad is outside the detection cone");
    }
  }
  const TagSpec& base = single_tag(world);
  const Eigen::Vector3d dir = viewing_direction(base);
  const Eigen::Vector3d position = base.position - cfg.distance_m * dir;
  const double yaw = yaw_of_heading(dir);

  SimConfig sc;
  sc.camera = K;

  YawSweepResult out;
  for (int trial = 0; trial < cfg.trials; ++trial) {
    const double offset = cfg.offsets_rad[static_cast<std::size_t>(trial) % cfg.offsets_rad.size()];
    WorldModel turned = world;
    turned.tags.front().yaw_rad += offset;
    Simulator sim(turned, sc);
    sim.reseed(derive_seed(cfg.seed, static_cast<std::uint64_t>(trial)));
    sim.place(position, yaw);
    auto m = measure(sim, turned.tags.front(), K);
    if (!m.record) {
      out.skipped.push_back({cfg.distance_m, trial, std::move(m.reason)});
      continue;
    }
    m.record->trial = trial;
    m.record->yaw_offset_rad = offset;
    out.records.push_back(*m.record);
  }

  std::vector<double> xs, ys;
  for (const auto& r : out.records) {
    xs.push_back(std::abs(r.yaw_offset_rad));
    ys.push_back(r.abs_error_m);
  }
  out.correlation = pearson(xs, ys);
  return out;
}

std::vector<DistanceBin> bin_medians(const std::vector<ErrorRecord>& records, double width) {
  if (!(width > 0.0)) throw InvalidArgument("bin width must be positive");
  std::map<long long, std::pair<std::vector<double>, std::vector<double>>> groups;
  for (const auto& r : records) {
    auto& g = groups[std::llround(r.ref_distance_m / width)];
    g.first.push_back(r.abs_error_m);
    g.second.push_back(r.rel_error);
  }
  std::vector<DistanceBin> bins;
  for (auto& [key, g] : groups) {
    bins.push_back({static_cast<double>(key) * width, median(g.first), median(g.second), g.first.size()});
  }
  return bins;
}

void write_csv(std::ostream& out, const std::vector<ErrorRecord>& records) {
  using detail::format_double;
  out << kCsvHeader << '\n';
  for (const auto& r : records) {
    out << format_double(r.ref_distance_m) << ',' << format_double(r.est_distance_m) << ','
        << format_double(r.abs_error_m) << ',' << format_double(r.rel_error * 100.0) << ','
        << format_double(r.yaw_offset_rad) << ',' << (r.regression_flag ? 1 : 0) << '\n';
  }
}

void emit_csv(const std::vector<ErrorRecord>& records, const std::string& path) {
  std::ofstream f(path);
  if (!f) throw FormatError("cannot open " + path + " for writing");
  write_csv(f, records);
  if (!f) throw FormatError("failed writing " + path);
}

std::vector<ErrorRecord> read_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || detail::trim(line) != kCsvHeader) throw FormatError("missing error CSV header");
  std::vector<ErrorRecord> out;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    const auto text = detail::trim(line);
    if (text.empty()) continue;
    if (text.front() == '#') break;
    std::vector<std::string> cells;
    std::stringstream ss{std::string(text)};
    for (std::string cell; std::getline(ss, cell, ',');) cells.push_back(cell);
    if (cells.size() != 6) throw FormatError("line " + std::to_string(lineno) + ": expected 6 columns");
    std::array<double, 5> v{};
    for (std::size_t i = 0; i < 5; ++i) {
      const auto d = detail::parse_double(cells[i]);
      if (!d) throw FormatError("line " + std::to_string(lineno) + ": bad number '" + cells[i] + "'");
      v[i] = *d;
    }
    if (cells[5] != "0" && cells[5] != "1") throw FormatError("line " + std::to_string(lineno) + ": bad flag");
    ErrorRecord r;
    r.ref_distance_m = v[0];
    r.est_distance_m = v[1];
    r.abs_error_m = v[2];
    r.rel_error = v[3] / 100.0;
    r.yaw_offset_rad = v[4];
    r.regression_flag = cells[5] == "1";
    out.push_back(r);
  }
  return out;
}

void write_plot_data(std::ostream& out, const std::vector<ErrorRecord>& records, double bin_width) {
  using detail::format_double;
  write_csv(out, records);
  out << "# binned_medians\n";
  out << "bin_m,median_abs_err_m,median_rel_err,count\n";
  for (const auto& b : bin_medians(records, bin_width)) {
    out << format_double(b.center_m) << ',' << format_double(b.median_abs_error_m) << ','
        << format_double(b.median_rel_error * 100.0) << ',' << b.count << '\n';
  }
}

std::string sweep_report(const std::vector<ErrorRecord>& records, double bin_width) {
  std::ostringstream out;
  out.setf(std::ios::fixed);
  out.precision(3);
  if (records.empty()) {
    out << "no records\n";
    return out.str();
  }
  std::vector<double> rel;
  std::size_t flagged = 0;
  for (const auto& r : records) {
    rel.push_back(100.0 * r.rel_error);
    if (r.regression_flag) ++flagged;
  }
  const auto bins = bin_medians(records, bin_width);
  out << "records: " << records.size() << ", regressions flagged: " << flagged << '\n';
  out << "relative error [%]   measured   reference\n";
  out << "  median             " << median(rel) << '\n';
  out << "  p95                " << percentile(rel, 0.95) << '\n';
  out << "  max                " << *std::max_element(rel.begin(), rel.end()) << "      7.000 (upper bound)\n";
  out << "  nearest bin median " << 100.0 * bins.front().median_rel_error << "      0.500 (close to the tag, "
      << bins.front().center_m << " m bin)\n";
  out << "bin [m]  median abs [m]  median rel [%]  n\n";
  for (const auto& b : bins) {
    out << "  " << b.center_m << "  " << b.median_abs_error_m << "  " << 100.0 * b.median_rel_error << "  "
        << b.count << '\n';
  }
  return out.str();
}

}  // namespace tagnav
