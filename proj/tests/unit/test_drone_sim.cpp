#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "tagnav/drone_sim.hpp"
#include "tagnav/error.hpp"
#include "test_support.hpp"

using namespace tagnav;
using namespace tagnav::testing;

namespace {

WorldModel quiet_world(std::vector<TagSpec> tags = {}) {
  WorldModel w;
  w.tags = std::move(tags);
  w.corner_noise_px_sigma = 0.0;
  return w;
}

TagSpec tag_ahead(double x, double z = 0.8, double yaw = 0.0) {
  TagSpec t;
  t.id = 1;
  t.position = {x, 0.0, z};
  t.yaw_rad = yaw;
  return t;
}

}  // namespace

TEST(SimTakeoff, RisesToEightyCentimetres) {
  Simulator sim(quiet_world(), {});
  EXPECT_EQ(sim.telemetry().height_m, 0.0);
  EXPECT_EQ(sim.telemetry().battery_pct, 100.0);
  sim.takeoff();
  EXPECT_DOUBLE_EQ(sim.state().position.z(), 0.8);
  EXPECT_DOUBLE_EQ(sim.telemetry().height_m, 0.8);
  EXPECT_TRUE(sim.state().airborne);
}

TEST(SimTakeoff, ErrorsWhenAirborneOrDepleted) {
  Simulator sim(quiet_world(), {});
  sim.takeoff();
  EXPECT_THROW(sim.takeoff(), SimError);
  Simulator flat(quiet_world(), {});
  flat.takeoff();
  flat.step_time(13.0 * 60.0 + 5.0);
  flat.land();
  EXPECT_EQ(flat.state().battery_pct, 0.0);
  EXPECT_THROW(flat.takeoff(), SimError);
}

TEST(SimMove, ForwardFollowsHeading) {
  Simulator sim(quiet_world(), {});
  sim.takeoff();
  sim.move({1, 0, 0});
  EXPECT_NEAR(sim.state().position.x(), 1.0, 1e-15);
  EXPECT_NEAR(sim.state().position.y(), 0.0, 1e-15);
  sim.turn(kPi / 2);  // now heading -y
  sim.move({1, 0, 0});
  EXPECT_NEAR(sim.state().position.x(), 1.0, 1e-15);
  EXPECT_NEAR(sim.state().position.y(), -1.0, 1e-15);
  sim.move({0, 1, 0});  // right of -y is -x
  EXPECT_NEAR(sim.state().position.x(), 0.0, 1e-15);
}

TEST(SimMove, DownIsPositive) {
  Simulator sim(quiet_world(), {});
  sim.takeoff();
  sim.move({0, 0, 0.3});
  EXPECT_NEAR(sim.state().position.z(), 0.5, 1e-15);
  sim.move({0, 0, -1.0});
  EXPECT_NEAR(sim.telemetry().height_m, 1.5, 1e-15);
}

TEST(SimMove, RejectsGroundedAndGroundCollision) {
  Simulator sim(quiet_world(), {});
  EXPECT_THROW(sim.move({1, 0, 0}), SimError);
  sim.takeoff();
  EXPECT_THROW(sim.move({0, 0, 0.78}), SimError);
  EXPECT_NEAR(sim.state().position.z(), 0.8, 1e-15);
}

TEST(SimMove, ProportionalNoiseHasConfiguredSpread) {
  auto world = quiet_world();
  world.actuation.proportional_sigma = 0.02;
  SimConfig cfg;
  cfg.rng_seed = 77;
  Simulator sim(world, cfg);
  sim.takeoff();
  double sum = 0.0, sum2 = 0.0;
  const int n = 1000;
  for (int i = 0; i < n; ++i) {
    const double before = sim.state().position.x();
    sim.move({1, 0, 0});
    const double err = sim.state().position.x() - before - 1.0;
    sum += err;
    sum2 += err * err;
  }
  const double mean = sum / n;
  const double sd = std::sqrt(sum2 / n - mean * mean);
  EXPECT_NEAR(sd, 0.02, 0.003);
  EXPECT_NEAR(mean, 0.0, 0.003);
}

TEST(SimTurn, EightEighthsReturnToStart) {
  auto world = quiet_world();
  world.start_yaw_rad = 0.3;
  Simulator sim(world, {});
  sim.takeoff();
  for (int i = 0; i < 8; ++i) sim.turn(kPi / 4);
  EXPECT_NEAR(sim.state().yaw, 0.3, 1e-12);
  sim.turn(0.0);
  EXPECT_NEAR(sim.state().yaw, 0.3, 1e-12);
}

TEST(SimTurn, NoisyTurnsAreSeeded) {
  auto world = quiet_world();
  world.actuation.turn_sigma_rad = 0.01;
  SimConfig cfg;
  cfg.rng_seed = 3;
  Simulator a(world, cfg), b(world, cfg);
  a.takeoff();
  b.takeoff();
  for (int i = 0; i < 10; ++i) {
    a.turn(0.5);
    b.turn(0.5);
  }
  EXPECT_EQ(a.state().yaw, b.state().yaw);
  EXPECT_NE(a.state().yaw, normalize_angle(5.0));
}

TEST(SimBattery, DrainsOverThirteenMinutesAndNeverIncreases) {
  Simulator sim(quiet_world(), {});
  sim.step_time(100.0);
  EXPECT_EQ(sim.state().battery_pct, 100.0);  // grounded
  sim.takeoff();
  double last = sim.state().battery_pct;
  for (int i = 0; i < 780; ++i) {
    sim.step_time(1.0);
    EXPECT_LE(sim.state().battery_pct, last);
    last = sim.state().battery_pct;
  }
  EXPECT_NEAR(sim.telemetry().battery_pct, 0.0, 0.2);
}

TEST(SimObserve, FrontoParallelTagMatchesAnalyticProjection) {
  Simulator sim(quiet_world({tag_ahead(2.0)}), {});
  sim.takeoff();
  const auto obs = sim.observe_tags();
  ASSERT_EQ(obs.size(), 1u);
  const double h = 0.092;
  const double f = 960.0;
  const double expect[4][2] = {{-h, -h}, {h, -h}, {h, h}, {-h, h}};
  for (int i = 0; i < 4; ++i) {
    EXPECT_NEAR(obs[0].corners[i].u, 480.0 + f * expect[i][0] / 2.0, 1e-9);
    EXPECT_NEAR(obs[0].corners[i].v, 360.0 + f * expect[i][1] / 2.0, 1e-9);
  }
}

TEST(SimObserve, CullsBehindFarAndOblique) {
  {
    Simulator sim(quiet_world({tag_ahead(-2.0)}), {});
    sim.takeoff();
    EXPECT_TRUE(sim.observe_tags().empty());
  }
  {
    Simulator sim(quiet_world({tag_ahead(11.0)}), {});
    sim.takeoff();
    EXPECT_TRUE(sim.observe_tags().empty());
  }
  {
    Simulator sim(quiet_world({tag_ahead(3.0, 0.8, deg(85))}), {});
    sim.takeoff();
    EXPECT_TRUE(sim.observe_tags().empty());
  }
  {
    // Facing away: the printed side is not visible.
    Simulator sim(quiet_world({tag_ahead(3.0, 0.8, kPi)}), {});
    sim.takeoff();
    EXPECT_TRUE(sim.observe_tags().empty());
  }
  {
    // Partially out of frame.
    Simulator sim(quiet_world({tag_ahead(0.2)}), {});
    sim.takeoff();
    EXPECT_TRUE(sim.observe_tags().empty());
  }
}

TEST(SimObserve, NoiseIsSeededAndDeterministic) {
  auto world = quiet_world({tag_ahead(3.0)});
  world.corner_noise_px_sigma = 0.5;
  SimConfig cfg;
  cfg.rng_seed = 9;
  Simulator a(world, cfg), b(world, cfg);
  a.takeoff();
  b.takeoff();
  EXPECT_EQ(a.observe_tags(), b.observe_tags());
  Simulator c(world, {});
  c.takeoff();
  EXPECT_NE(a.observe_tags(), c.observe_tags());
}

TEST(SimObserve, GeometricConsistencyWithEstimator) {
  std::mt19937_64 rng(31);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  int seen = 0;
  for (int i = 0; i < 300; ++i) {
    TagSpec t = tag_ahead(0.5 + 6.0 * std::abs(u(rng)), 0.8 + 0.3 * u(rng), 0.8 * u(rng));
    t.position.y() = 0.5 * u(rng);
    t.pitch_rad = 0.3 * u(rng);
    t.roll_rad = kPi * u(rng);
    Simulator sim(quiet_world({t}), {});
    sim.takeoff();
    const auto obs = sim.observe_tags();
    if (obs.empty()) continue;
    ++seen;
    const TagPose truth = camera_frame_tag_pose(sim.state().position, sim.state().yaw, t);
    const TagPose est = estimate_tag_pose(obs[0], sim.camera(), t.size_m);
    EXPECT_LT((est.translation - truth.translation).norm(), 1e-6);
    EXPECT_LT(rotation_angle_between(est.rotation, truth.rotation), 1e-6);
  }
  EXPECT_GT(seen, 100);
}

TEST(SimGeometry, SquarelyFacedTagHasIdentityRotation) {
  for (double yaw : {0.0, 0.7, -2.0}) {
    TagSpec t;
    t.yaw_rad = yaw;
    const Eigen::Vector3d heading(std::cos(yaw), -std::sin(yaw), 0.0);
    t.position = 3.0 * heading;
    const auto pose = camera_frame_tag_pose(Eigen::Vector3d::Zero(), yaw, t);
    EXPECT_LT((pose.rotation - Eigen::Matrix3d::Identity()).norm(), 1e-12);
    EXPECT_LT((pose.translation - Eigen::Vector3d(0, 0, 3)).norm(), 1e-12);
  }
}

TEST(SimRangefinder, ExactAndNoisyModes) {
  Simulator exact(quiet_world({tag_ahead(3.0, 0.0)}), {});
  EXPECT_DOUBLE_EQ(exact.rangefinder(1), 3.0);
  EXPECT_THROW(exact.rangefinder(2), InvalidArgument);

  auto world = quiet_world({tag_ahead(3.0, 0.0)});
  world.rangefinder_noise = true;
  Simulator noisy(world, {});
  double lo = 10, hi = 0;
  for (int i = 0; i < 10000; ++i) {
    const double d = noisy.rangefinder(1);
    lo = std::min(lo, d);
    hi = std::max(hi, d);
  }
  EXPECT_GE(lo, 3.0 - kRangefinderPrecisionM);
  EXPECT_LE(hi, 3.0 + kRangefinderPrecisionM);
  EXPECT_LT(lo, 3.0 - 0.9 * kRangefinderPrecisionM);
  EXPECT_GT(hi, 3.0 + 0.9 * kRangefinderPrecisionM);
}

TEST(SimDeterminism, SameSeedSameTrajectory) {
  auto world = quiet_world({tag_ahead(3.0)});
  world.actuation = {0.03, 0.01, 0.02};
  world.corner_noise_px_sigma = 0.5;
  SimConfig cfg;
  cfg.rng_seed = 1234;
  auto run = [&] {
    Simulator sim(world, cfg);
    sim.takeoff();
    std::vector<double> trace;
    for (int i = 0; i < 20; ++i) {
      sim.move({0.3, 0.1, -0.05});
      sim.turn(0.2);
      for (const auto& o : sim.observe_tags()) trace.push_back(o.corners[0].u);
      trace.push_back(sim.state().position.x());
      trace.push_back(sim.state().yaw);
    }
    return trace;
  };
  EXPECT_EQ(run(), run());
}

TEST(SimWorld, ValidateRejectsBadWorlds) {
  WorldModel w;
  w.tags = {tag_ahead(1.0), tag_ahead(2.0)};
  EXPECT_THROW(Simulator(w, {}), InvalidArgument);
  w.tags = {tag_ahead(1.0)};
  w.corner_noise_px_sigma = -1.0;
  EXPECT_THROW(Simulator(w, {}), InvalidArgument);
}

TEST(DeriveSeed, IndependentStreams) {
  EXPECT_EQ(derive_seed(1, 2, 3), derive_seed(1, 2, 3));
  EXPECT_NE(derive_seed(1, 2, 3), derive_seed(1, 3, 2));
  EXPECT_NE(derive_seed(1, 2, 3), derive_seed(2, 2, 3));
}
