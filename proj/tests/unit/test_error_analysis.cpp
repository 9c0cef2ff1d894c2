#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "tagnav/error.hpp"
#include "tagnav/error_analysis.hpp"
#include "tagnav/world_io.hpp"
#include "test_support.hpp"

using namespace tagnav;
using tagnav::testing::deg;

namespace {

WorldModel one_tag(double corner_sigma) {
  WorldModel w = load_world(TAGNAV_SOURCE_DIR "/worlds/one_tag.json").world;
  w.corner_noise_px_sigma = corner_sigma;
  return w;
}

}  // namespace

TEST(DistanceEstimate, Norm) {
  EXPECT_EQ(distance_estimate({0, 0, 2}), 2.0);
  EXPECT_EQ(distance_estimate({1, 2, 2}), 3.0);
  EXPECT_EQ(distance_estimate({0, 0, 0}), 0.0);
}

TEST(Errors, Examples) {
  const auto a = errors(5.0, 5.1);
  EXPECT_NEAR(a.abs, 0.1, 1e-12);
  EXPECT_NEAR(a.rel, 0.1 / 5.1, 1e-15);
  EXPECT_NEAR(a.rel, 0.019608, 1e-6);
  const auto b = errors(3.0, 3.0);
  EXPECT_EQ(b.abs, 0.0);
  EXPECT_EQ(b.rel, 0.0);
  const auto c = errors(1.005, 1.0);
  EXPECT_NEAR(c.abs, 0.005, 1e-15);
  EXPECT_NEAR(c.rel, 0.005, 1e-15);
  EXPECT_THROW(errors(1.0, 0.0), InvalidArgument);
  EXPECT_THROW(errors(1.0, -2.0), InvalidArgument);
}

TEST(Errors, RelativeErrorIsScaleInvariant) {
  for (double lambda : {0.5, 2.0, 4.0, 0.25}) {
    EXPECT_EQ(errors(1.3 * lambda, 1.25 * lambda).rel, errors(1.3, 1.25).rel);
  }
}

TEST(Correlation, PearsonExamples) {
  const std::vector<double> xs{1, 2, 3, 4, 5.5};
  EXPECT_DOUBLE_EQ(pearson(xs, xs).r, 1.0);
  std::vector<double> neg;
  for (double x : xs) neg.push_back(-x);
  EXPECT_DOUBLE_EQ(pearson(xs, neg).r, -1.0);
  const auto c = pearson({2, 2, 2}, {1, 2, 3});
  EXPECT_TRUE(c.degenerate);
  EXPECT_EQ(c.r, 0.0);
  EXPECT_TRUE(pearson({1}, {1}).degenerate);
  EXPECT_THROW(pearson({1, 2}, {1}), InvalidArgument);
}

TEST(Correlation, SpearmanUsesRanks) {
  EXPECT_DOUBLE_EQ(spearman({1, 2, 3, 4}, {1, 10, 100, 1000}).r, 1.0);
  EXPECT_DOUBLE_EQ(spearman({1, 2, 3, 4}, {4, 3, 2, 1}).r, -1.0);
  EXPECT_NEAR(spearman({1, 2, 2, 3}, {1, 2, 3, 4}).r, 0.9486832980505138, 1e-12);
}

TEST(Statistics, MedianAndPercentile) {
  EXPECT_EQ(median({3, 1, 2}), 2.0);
  EXPECT_EQ(median({4, 1, 2, 3}), 2.5);
  EXPECT_EQ(percentile({0, 10}, 0.95), 9.5);
  EXPECT_THROW(median({}), InvalidArgument);
  EXPECT_THROW(percentile({1}, 1.5), InvalidArgument);
}

TEST(RangeSweep, DefaultDistances) {
  const auto d = RangeSweepConfig::default_distances();
  ASSERT_EQ(d.size(), 27u);
  EXPECT_EQ(d.front(), 7.0);
  EXPECT_EQ(d.back(), 0.5);
}

TEST(RangeSweep, NoiselessEstimatesMatchRangefinder) {
  const auto res = range_sweep(one_tag(0.0), default_tello_intrinsics(), {});
  EXPECT_TRUE(res.skipped.empty());
  ASSERT_EQ(res.records.size(), 27u);
  for (const auto& r : res.records) {
    EXPECT_LT(r.abs_error_m, 1e-6) << r.ref_distance_m;
    EXPECT_NEAR(r.abs_error_m, std::abs(r.est_distance_m - r.ref_distance_m), 1e-15);
  }
  EXPECT_NEAR(res.records.front().ref_distance_m, 7.0, 1e-12);
}

TEST(RangeSweep, NoisyMediansShrinkTowardTheTag) {
  RangeSweepConfig cfg;
  cfg.distances_m = {7, 6, 5, 4, 3, 2, 1};
  cfg.trials_per_point = 100;
  cfg.seed = 5;
  const auto res = range_sweep(one_tag(0.5), default_tello_intrinsics(), cfg);
  const auto bins = bin_medians(res.records);
  ASSERT_EQ(bins.size(), 7u);
  std::vector<double> xs, ys;
  for (const auto& b : bins) {
    xs.push_back(b.center_m);
    ys.push_back(b.median_rel_error);
    EXPECT_EQ(b.count, 100u);
  }
  EXPECT_GT(spearman(xs, ys).r, 0.8);
}

TEST(RangeSweep, DeterministicAndRegressionFlags) {
  RangeSweepConfig cfg;
  cfg.distances_m = {4, 3, 3, 2};
  cfg.trials_per_point = 3;
  cfg.seed = 9;
  const auto a = range_sweep(one_tag(0.5), default_tello_intrinsics(), cfg);
  const auto b = range_sweep(one_tag(0.5), default_tello_intrinsics(), cfg);
  ASSERT_EQ(a.records.size(), 12u);
  for (std::size_t i = 0; i < a.records.size(); ++i) {
    EXPECT_EQ(a.records[i].est_distance_m, b.records[i].est_distance_m);
    const bool first_of_trial = i % 4 == 0;
    const bool expected = !first_of_trial && a.records[i].abs_error_m > a.records[i - 1].abs_error_m;
    EXPECT_EQ(a.records[i].regression_flag, expected);
  }
}

TEST(RangeSweep, RejectsBadConfigurations) {
  const auto K = default_tello_intrinsics();
  RangeSweepConfig cfg;
  cfg.distances_m = {1, 2};
  EXPECT_THROW(range_sweep(one_tag(0), K, cfg), InvalidArgument);
  WorldModel two = one_tag(0);
  two.tags.push_back(two.tags.front());
  two.tags.back().id = 9;
  EXPECT_THROW(range_sweep(two, K, {}), InvalidArgument);
  EXPECT_THROW(range_sweep(WorldModel{}, K, {}), InvalidArgument);
}

TEST(RangeSweep, OutOfRangePointsAreSkippedWithReason) {
  WorldModel w = one_tag(0.0);
  w.detect_max_range_m = 4.0;
  RangeSweepConfig cfg;
  cfg.distances_m = {6, 5, 3};
  const auto res = range_sweep(w, default_tello_intrinsics(), cfg);
  EXPECT_EQ(res.records.size(), 1u);
  ASSERT_EQ(res.skipped.size(), 2u);
  EXPECT_EQ(res.skipped[0].distance_m, 6.0);
  EXPECT_FALSE(res.skipped[0].reason.empty());
  EXPECT_FALSE(res.records[0].regression_flag);
}

TEST(YawSweep, NoiselessIsDegenerate) {
  YawSweepConfig cfg;
  cfg.offsets_rad = {0.0, deg(10), deg(20), deg(30)};
  cfg.trials = 8;
  const auto res = yaw_sweep(one_tag(0.0), default_tello_intrinsics(), cfg);
  ASSERT_EQ(res.records.size(), 8u);
  for (const auto& r : res.records) EXPECT_LT(r.abs_error_m, 1e-6);
  EXPECT_EQ(res.records[5].yaw_offset_rad, deg(10));
}

TEST(YawSweep, SingleOffsetIsDegenerate) {
  YawSweepConfig cfg;
  cfg.offsets_rad = {deg(15)};
  cfg.trials = 20;
  const auto res = yaw_sweep(one_tag(0.5), default_tello_intrinsics(), cfg);
  EXPECT_TRUE(res.correlation.degenerate);
}

TEST(YawSweep, RejectsOffsetsOutsideTheCone) {
  YawSweepConfig cfg;
  cfg.offsets_rad = {deg(85)};
  EXPECT_THROW(yaw_sweep(one_tag(0.5), default_tello_intrinsics(), cfg), InvalidArgument);
}

TEST(Csv, HeaderPercentAndRoundTrip) {
  ErrorRecord r{5.1, 5.0, 0.1, 0.1 / 5.1, 0.25, true, 0};
  std::ostringstream out;
  write_csv(out, {r});
  const std::string text = out.str();
  EXPECT_EQ(text.substr(0, text.find('\n')), "ref_m,est_m,abs_err_m,rel_err,yaw_offset_rad,regression");
  EXPECT_EQ(text.back(), '\n');
  EXPECT_NE(text.find(",1.96078431372549"), std::string::npos);
  std::istringstream in(text);
  const auto back = read_csv(in);
  ASSERT_EQ(back.size(), 1u);
  EXPECT_EQ(back[0].ref_distance_m, 5.1);
  EXPECT_NEAR(back[0].rel_error, r.rel_error, 1e-15);
  EXPECT_TRUE(back[0].regression_flag);
  std::istringstream bad("nope\n");
  EXPECT_THROW(read_csv(bad), FormatError);
}

TEST(Csv, PlotDataAppendsBinnedMedians) {
  std::vector<ErrorRecord> recs{{1.0, 1.01, 0.01, 0.01, 0, false, 0},
                                {1.1, 1.12, 0.02, 0.02 / 1.1, 0, false, 0},
                                {3.0, 3.3, 0.3, 0.1, 0, false, 0}};
  std::ostringstream out;
  write_plot_data(out, recs);
  const auto text = out.str();
  EXPECT_NE(text.find("# binned_medians\nbin_m,median_abs_err_m,median_rel_err,count\n"), std::string::npos);
  EXPECT_NE(text.find("\n3,0.3,10,1\n"), std::string::npos);
  std::istringstream in(text);
  EXPECT_EQ(read_csv(in).size(), 3u);
}

TEST(Report, PrintsReferenceFigures) {
  std::vector<ErrorRecord> recs{{1.0, 1.01, 0.01, 0.01, 0, false, 0}, {5.0, 5.2, 0.2, 0.04, 0, true, 0}};
  const auto report = sweep_report(recs);
  EXPECT_NE(report.find("7.000"), std::string::npos);
  EXPECT_NE(report.find("0.500"), std::string::npos);
  EXPECT_NE(report.find("regressions flagged: 1"), std::string::npos);
}
