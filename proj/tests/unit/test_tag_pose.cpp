#include <gtest/gtest.h>

#include <random>
#include <vector>

#include "tagnav/error.hpp"
#include "tagnav/tag_pose.hpp"
#include "test_support.hpp"

using namespace tagnav;
using namespace tagnav::testing;

namespace {

CameraIntrinsics camera(Distortion d = {}) { return {960, 720, 480.0, 360.0, 960.0, 960.0, d}; }

std::vector<PlanePixelPair> pairs_from(const Eigen::Matrix3d& H, const std::vector<Eigen::Vector2d>& pts) {
  std::vector<PlanePixelPair> out;
  for (const auto& p : pts) {
    const Eigen::Vector3d q = H * p.homogeneous();
    out.push_back({p, {q.x() / q.z(), q.y() / q.z()}});
  }
  return out;
}

double relative_frobenius_up_to_scale(const Eigen::Matrix3d& a, const Eigen::Matrix3d& b) {
  const Eigen::Matrix3d an = a / a.norm();
  Eigen::Matrix3d bn = b / b.norm();
  if ((an - bn).norm() > (an + bn).norm()) bn = -bn;
  return (an - bn).norm();
}

}  // namespace

TEST(TagCorners, SizeTwoGivesUnitCorners) {
  const auto c = tag_corners_3d(2.0);
  EXPECT_EQ(c[0], Eigen::Vector3d(-1, -1, 0));
  EXPECT_EQ(c[1], Eigen::Vector3d(1, -1, 0));
  EXPECT_EQ(c[2], Eigen::Vector3d(1, 1, 0));
  EXPECT_EQ(c[3], Eigen::Vector3d(-1, 1, 0));
}

TEST(TagCorners, DefaultTagHalfSide) {
  const auto c = tag_corners_3d(0.184);
  EXPECT_DOUBLE_EQ(c[2].x(), 0.092);
  EXPECT_DOUBLE_EQ(c[2].y(), 0.092);
}

TEST(TagCorners, UnitTagPerimeter) {
  const auto c = tag_corners_3d(1.0);
  double perimeter = 0.0;
  for (int i = 0; i < 4; ++i) perimeter += (c[(i + 1) % 4] - c[i]).norm();
  EXPECT_DOUBLE_EQ(perimeter, 4.0);
}

TEST(TagCorners, RejectsNonPositiveSize) {
  EXPECT_THROW(tag_corners_3d(0.0), InvalidArgument);
  EXPECT_THROW(tag_corners_3d(-1.0), InvalidArgument);
}

TEST(Homography, IdentityCorrespondences) {
  const auto H = homography_dlt(pairs_from(Eigen::Matrix3d::Identity(), {{0.3, 0.1}, {2, -1}, {1.5, 2.5}, {-1, 0.7}}));
  EXPECT_LT((H.matrix - Eigen::Matrix3d::Identity()).norm(), 1e-12);
}

TEST(Homography, RecoversKnownMatrix) {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  const std::vector<Eigen::Vector2d> square = {{-1, -1}, {1, -1}, {1, 1}, {-1, 1}};
  for (int i = 0; i < 200; ++i) {
    Eigen::Matrix3d H;
    H << 300 + 50 * u(rng), 40 * u(rng), 480 + 100 * u(rng), 40 * u(rng), 300 + 50 * u(rng), 360 + 100 * u(rng),
        0.1 * u(rng), 0.1 * u(rng), 1.0;
    const auto est = homography_dlt(pairs_from(H, square));
    EXPECT_LT(relative_frobenius_up_to_scale(est.matrix, H), 1e-9);
    EXPECT_DOUBLE_EQ(est.matrix(2, 2), 1.0);
  }
}

TEST(Homography, OverdeterminedFit) {
  Eigen::Matrix3d H;
  H << 1.2, 0.1, 5, -0.2, 0.9, 3, 0.001, 0.002, 1;
  std::vector<Eigen::Vector2d> pts;
  for (int i = 0; i < 10; ++i) pts.emplace_back(i * 1.3 - 4, (i * i) % 7 - 3.0);
  const auto est = homography_dlt(pairs_from(H, pts));
  EXPECT_LT(relative_frobenius_up_to_scale(est.matrix, H), 1e-9);
}

TEST(Homography, DegenerateInputs) {
  EXPECT_THROW(homography_dlt(pairs_from(Eigen::Matrix3d::Identity(), {{0, 0}, {1, 1}, {2, 2}, {3, 3}})),
               RankDeficiency);
  EXPECT_THROW(homography_dlt(pairs_from(Eigen::Matrix3d::Identity(), {{0, 0}, {1, 0}, {2, 0}, {0, 1}})),
               RankDeficiency);
  EXPECT_THROW(homography_dlt(pairs_from(Eigen::Matrix3d::Identity(), {{0, 0}, {1, 0}, {0, 1}})), RankDeficiency);
}

TEST(PoseFromHomography, FrontoParallelCentered) {
  const auto K = camera();
  for (double d : {0.5, 2.0, 4.0}) {
    TagPose truth;
    truth.translation = {0, 0, d};
    const auto obs = reference_observation(truth, K, 0.184);
    std::vector<PlanePixelPair> pairs;
    const double s[4][2] = {{-1, -1}, {1, -1}, {1, 1}, {-1, 1}};
    for (int i = 0; i < 4; ++i) pairs.push_back({{s[i][0], s[i][1]}, obs.corners[i]});
    const auto pose = pose_from_homography(homography_dlt(pairs), K, 0.184);
    EXPECT_LT((pose.translation - truth.translation).norm(), 1e-9);
    EXPECT_LT((pose.rotation - Eigen::Matrix3d::Identity()).norm(), 1e-9);
  }
}

TEST(PoseFromHomography, InPlaneShiftAndDepthScaling) {
  const auto K = camera();
  auto solve = [&](const TagPose& truth) {
    const auto obs = reference_observation(truth, K, 0.184);
    std::vector<PlanePixelPair> pairs;
    const double s[4][2] = {{-1, -1}, {1, -1}, {1, 1}, {-1, 1}};
    for (int i = 0; i < 4; ++i) pairs.push_back({{s[i][0], s[i][1]}, obs.corners[i]});
    return pose_from_homography(homography_dlt(pairs), K, 0.184);
  };
  TagPose base;
  base.rotation = rot_y(deg(20)) * rot_x(deg(-10));
  base.translation = {0.1, -0.05, 2.0};
  const auto p0 = solve(base);
  TagPose shifted = base;
  shifted.translation += base.rotation * Eigen::Vector3d(0.3, -0.2, 0.0);
  const auto p1 = solve(shifted);
  EXPECT_LT(rotation_angle_between(p0.rotation, p1.rotation), 1e-9);
  EXPECT_LT((p1.translation - p0.translation - base.rotation * Eigen::Vector3d(0.3, -0.2, 0.0)).norm(), 1e-9);
  TagPose far = base;
  far.translation *= 2.0;
  EXPECT_NEAR(solve(far).translation.z(), 2.0 * p0.translation.z(), 1e-9);
}

TEST(PoseFromHomography, SignFlipKeepsTagInFront) {
  const auto K = camera();
  TagPose truth;
  truth.translation = {0.2, 0.1, 3.0};
  const auto obs = reference_observation(truth, K, 0.184);
  std::vector<PlanePixelPair> pairs;
  const double s[4][2] = {{-1, -1}, {1, -1}, {1, 1}, {-1, 1}};
  for (int i = 0; i < 4; ++i) pairs.push_back({{s[i][0], s[i][1]}, obs.corners[i]});
  Homography H = homography_dlt(pairs);
  H.matrix *= -3.0;
  const auto pose = pose_from_homography(H, K, 0.184);
  EXPECT_GT(pose.translation.z(), 0.0);
  EXPECT_LT((pose.translation - truth.translation).norm(), 1e-9);
}

TEST(Refine, ExactObservationIsAFixedPoint) {
  const auto K = camera({-0.1, 0.01, 0.0, 0.0});
  TagPose truth;
  truth.rotation = rot_y(deg(25));
  truth.translation = {0.3, -0.1, 2.5};
  const auto obs = reference_observation(truth, K, 0.184);
  const auto r = refine_pose(truth, obs, K, 0.184);
  EXPECT_FALSE(r.degraded);
  EXPECT_LT((r.pose.translation - truth.translation).norm(), 1e-12);
  EXPECT_LT(rotation_angle_between(r.pose.rotation, truth.rotation), 1e-12);
}

TEST(Refine, RecoversFromPerturbedStart) {
  const auto K = camera({-0.15, 0.02, 0.001, -0.001});
  std::mt19937_64 rng(99);
  for (int i = 0; i < 100; ++i) {
    const auto truth = random_visible_pose(rng, K, 0.184, 0.5, 5.0);
    const auto obs = reference_observation(truth, K, 0.184);
    TagPose start = truth;
    start.rotation = Eigen::AngleAxisd(deg(1.0), Eigen::Vector3d(1, 2, 3).normalized()).toRotationMatrix() *
                     truth.rotation;
    start.translation += Eigen::Vector3d(0.005, -0.003, 0.004).normalized() * 0.005;
    const auto r = refine_pose(start, obs, K, 0.184);
    EXPECT_LT((r.pose.translation - truth.translation).norm(), 1e-7);
    EXPECT_LT(rotation_angle_between(r.pose.rotation, truth.rotation), 1e-7);
    EXPECT_LE(r.final_rms, r.initial_rms);
  }
}

TEST(Refine, NeverIncreasesReprojectionError) {
  const auto K = camera();
  std::mt19937_64 rng(5);
  std::normal_distribution<double> noise(0.0, 1.0);
  for (int i = 0; i < 200; ++i) {
    const auto truth = random_visible_pose(rng, K, 0.184);
    auto obs = reference_observation(truth, K, 0.184);
    for (auto& c : obs.corners) {
      c.u += noise(rng);
      c.v += noise(rng);
    }
    TagPose start = truth;
    start.translation *= 1.02;
    const auto r = refine_pose(start, obs, K, 0.184);
    EXPECT_LE(r.final_rms, r.initial_rms + 1e-12);
    EXPECT_NEAR(r.final_rms, reprojection_error_rms(r.pose, obs, K, 0.184), 1e-12);
  }
}

TEST(Refine, SingularNormalEquationsDegrade) {
  const auto K = camera();
  TagPose truth;
  truth.translation = {0, 0, 2};
  const auto obs = reference_observation(truth, K, 0.184);
  // A vanishing tag makes every corner the same point: the Jacobian loses rank.
  const auto r = refine_pose(truth, obs, K, 1e-12);
  EXPECT_TRUE(r.degraded);
  EXPECT_EQ(r.pose.translation, truth.translation);
}

TEST(Jacobian, MatchesCentralDifferences) {
  const auto K = camera({-0.2, 0.05, 0.001, 0.002});
  std::mt19937_64 rng(21);
  const double h = 1e-6;
  for (int n = 0; n < 100; ++n) {
    const auto p = random_visible_pose(rng, K, 0.184);
    const CornerJacobian J = corner_jacobian(p, K, 0.184);
    CornerJacobian fd;
    for (int k = 0; k < 6; ++k) {
      Vector6d e = Vector6d::Zero();
      e(k) = h;
      const auto plus = predict_corners(apply_increment(p, e), K, 0.184);
      const auto minus = predict_corners(apply_increment(p, -e), K, 0.184);
      for (int c = 0; c < 4; ++c) {
        fd(2 * c, k) = (plus[c].u - minus[c].u) / (2 * h);
        fd(2 * c + 1, k) = (plus[c].v - minus[c].v) / (2 * h);
      }
    }
    EXPECT_LT((J - fd).norm() / fd.norm(), 1e-4);
  }
}

TEST(Estimate, NoiselessRoundTripWithDistortion) {
  const auto K = camera({-0.12, 0.03, 0.0005, -0.0005});
  std::mt19937_64 rng(2024);
  for (int i = 0; i < 300; ++i) {
    const auto truth = random_visible_pose(rng, K, 0.184);
    const auto est = estimate_tag_pose(reference_observation(truth, K, 0.184), K, 0.184);
    EXPECT_LT((est.translation - truth.translation).norm(), 1e-6);
    EXPECT_LT(rotation_angle_between(est.rotation, truth.rotation), 1e-6);
    EXPECT_NO_THROW(est.validate());
  }
}

TEST(Estimate, DistanceInvariantUnderTagRoll) {
  const auto K = camera();
  TagPose base;
  base.rotation = rot_y(deg(15));
  base.translation = {0.2, 0.1, 3.0};
  const double d0 = estimate_tag_pose(reference_observation(base, K, 0.184), K, 0.184).translation.norm();
  for (double roll : {deg(30), deg(90), deg(180), deg(-120)}) {
    TagPose rolled = base;
    rolled.rotation = base.rotation * rot_z(roll);
    const double d = estimate_tag_pose(reference_observation(rolled, K, 0.184), K, 0.184).translation.norm();
    EXPECT_NEAR(d, d0, 1e-9);
  }
}

TEST(Estimate, RejectsInvalidInput) {
  const auto K = camera();
  TagObservation flat{0, {{{0, 0}, {1, 1}, {2, 2}, {3, 3}}}};
  EXPECT_THROW(estimate_tag_pose(flat, K, 0.184), InvalidArgument);
  TagPose p;
  p.translation = {0, 0, 2};
  EXPECT_THROW(estimate_tag_pose(reference_observation(p, K, 0.184), K, 0.0), InvalidArgument);
}

TEST(TagTranslation, AxisSemantics) {
  TagPose p;
  p.translation = {0, 0, 2};
  EXPECT_EQ(tag_translation(p), Eigen::Vector3d(0, 0, 2));
  p.translation = {0.5, 0, 2};
  EXPECT_GT(tag_translation(p).x(), 0.0);  // to the right
  p.translation = {0, -0.3, 2};
  EXPECT_LT(tag_translation(p).y(), 0.0);  // above the optical axis
}

TEST(TagFacing, SquarelySeenTagLooksAlongTheAxis) {
  TagPose p;
  p.translation = {0, 0, 2};
  EXPECT_LT((tag_facing_direction(p) - Eigen::Vector3d(0, 0, 1)).norm(), 1e-9);
}

TEST(TagFacing, YawedNinetyDegreesIsHorizontalAndPerpendicular) {
  TagPose p;
  p.translation = {0, 0, 2};
  p.rotation = rot_y(deg(90));
  const auto f = tag_facing_direction(p);
  EXPECT_NEAR(f.z(), 0.0, 1e-12);
  EXPECT_NEAR(f.y(), 0.0, 1e-12);
  EXPECT_NEAR(std::abs(f.x()), 1.0, 1e-12);
}

TEST(TagFacing, AlwaysUnitLength) {
  std::mt19937_64 rng(1);
  for (int i = 0; i < 100; ++i) {
    TagPose p = random_visible_pose(rng, camera(), 0.184);
    EXPECT_NEAR(tag_facing_direction(p).norm(), 1.0, 1e-12);
  }
}

TEST(Reprojection, RmsArithmetic) {
  const auto K = camera();
  TagPose p;
  p.translation = {0.1, 0.0, 2.0};
  auto obs = reference_observation(p, K, 0.184);
  EXPECT_NEAR(reprojection_error_rms(p, obs, K, 0.184), 0.0, 1e-12);
  obs.corners[2].v += 1.0;
  EXPECT_NEAR(reprojection_error_rms(p, obs, K, 0.184), std::sqrt(1.0 / 8.0), 1e-9);
}

TEST(TagPoseInvariants, ValidateChecksOrthonormalityAndDepth) {
  TagPose p;
  p.translation = {0, 0, 1};
  EXPECT_NO_THROW(p.validate());
  p.translation.z() = -1;
  EXPECT_THROW(p.validate(), InvalidArgument);
  p.translation.z() = 1;
  p.rotation(0, 0) = -1;  // reflection
  EXPECT_THROW(p.validate(), InvalidArgument);
  p.rotation = 1.01 * Eigen::Matrix3d::Identity();
  EXPECT_THROW(p.validate(), InvalidArgument);
}

TEST(NearestRotation, ProjectsOntoSO3) {
  Eigen::Matrix3d m = rot_z(0.3) * rot_x(-0.2);
  m(0, 1) += 0.01;
  const auto r = nearest_rotation(m);
  EXPECT_LT((r.transpose() * r - Eigen::Matrix3d::Identity()).norm(), 1e-12);
  EXPECT_NEAR(r.determinant(), 1.0, 1e-12);
  EXPECT_NEAR(nearest_rotation(-Eigen::Matrix3d::Identity()).determinant(), 1.0, 1e-12);
}
