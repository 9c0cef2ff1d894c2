#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "tagnav/camera_model.hpp"
#include "tagnav/drone_sim.hpp"

namespace tagnav {

struct ErrorRecord {
  double ref_distance_m = 0.0;  ///< rangefinder reading
  double est_distance_m = 0.0;
  double abs_error_m = 0.0;
  double rel_error = 0.0;  ///< fraction of the reference
  double yaw_offset_rad = 0.0;
  bool regression_flag = false;
  int trial = 0;
};

/// Length of the camera-frame translation to the tag.
double distance_estimate(const Eigen::Vector3d& t);

struct DistanceErrors {
  double abs = 0.0;
  double rel = 0.0;
};

/// Throws InvalidArgument unless ref > 0.
DistanceErrors errors(double est, double ref);

struct Correlation {
  double r = 0.0;
  bool degenerate = false;  ///< fewer than two points or zero variance; r is 0
};

Correlation pearson(const std::vector<double>& xs, const std::vector<double>& ys);
/// Pearson correlation of average ranks.
Correlation spearman(const std::vector<double>& xs, const std::vector<double>& ys);

double median(std::vector<double> v);
/// Linear-interpolated percentile, q in [0, 1].
double percentile(std::vector<double> v, double q);

struct SkippedPoint {
  double distance_m = 0.0;
  int trial = 0;
  std::string reason;
};

struct RangeSweepConfig {
  std::vector<double> distances_m = default_distances();
  int trials_per_point = 1;
  std::uint64_t seed = 0;

  /// 7 m down to 0.5 m in 0.25 m steps.
  static std::vector<double> default_distances();
};

struct RangeSweepResult {
  std::vector<ErrorRecord> records;
  std::vector<SkippedPoint> skipped;
};

/// Straight-line approach along the normal of the world's only tag, at the
/// tag's height. Each (trial, distance) draws corner noise from its own
/// stream, so results do not depend on evaluation order. Regression flags
/// mark a record whose error exceeds the previous farther point of the
/// same trial.
RangeSweepResult range_sweep(const WorldModel& world, const CameraIntrinsics& K, const RangeSweepConfig& cfg);

struct YawSweepConfig {
  double distance_m = 3.0;
  std::vector<double> offsets_rad;
  int trials = 1;  ///< total records; trial i uses offsets_rad[i % size]
  std::uint64_t seed = 0;
};

struct YawSweepResult {
  std::vector<ErrorRecord> records;
  std::vector<SkippedPoint> skipped;
  Correlation correlation;  ///< |offset| against abs_error
};

/// Fixed distance on the tag normal while the tag is turned about the
/// vertical by each offset. Throws InvalidArgument for offsets outside the
/// detection cone.
YawSweepResult yaw_sweep(const WorldModel& world, const CameraIntrinsics& K, const YawSweepConfig& cfg);

struct DistanceBin {
  double center_m = 0.0;
  double median_abs_error_m = 0.0;
  double median_rel_error = 0.0;
  std::size_t count = 0;
};

/// Groups records by reference distance rounded to a multiple of `width`.
std::vector<DistanceBin> bin_medians(const std::vector<ErrorRecord>& records, double width = 1.0);

inline constexpr const char* kCsvHeader = "ref_m,est_m,abs_err_m,rel_err,yaw_offset_rad,regression";

/// Relative error is written in percent.
void write_csv(std::ostream& out, const std::vector<ErrorRecord>& records);
void emit_csv(const std::vector<ErrorRecord>& records, const std::string& path);
std::vector<ErrorRecord> read_csv(std::istream& in);

/// CSV rows followed by a `# binned_medians` section for plotting.
void write_plot_data(std::ostream& out, const std::vector<ErrorRecord>& records, double bin_width = 1.0);

/// Measured error percentiles next to the reference figures of the original
/// flight test (7% worst case, 0.5% near the tag).
std::string sweep_report(const std::vector<ErrorRecord>& records, double bin_width = 1.0);

}  // namespace tagnav
