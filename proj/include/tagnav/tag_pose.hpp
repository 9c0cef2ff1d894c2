#pragma once

#include <Eigen/Core>
#include <array>
#include <span>

#include "tagnav/camera_model.hpp"
#include "tagnav/observation.hpp"

namespace tagnav {

using Vector6d = Eigen::Matrix<double, 6, 1>;
using CornerJacobian = Eigen::Matrix<double, 8, 6>;

/// Rigid transform taking tag-frame points into the camera frame.
///
/// Tag frame: origin at the tag centre, x to the right and y downwards as
/// seen by a viewer looking at the printed face, z = x cross y pointing
/// into the face (away from that viewer). A tag seen squarely therefore
/// has rotation == identity.
struct TagPose {
  Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
  Eigen::Vector3d translation = Eigen::Vector3d::Zero();

  /// Throws InvalidArgument unless rotation is orthonormal with det 1
  /// (1e-9) and translation.z > 0.
  void validate() const;
};

/// Planar projective map, stored normalized so that H(2,2) == 1 whenever
/// that entry is non-zero.
struct Homography {
  Eigen::Matrix3d matrix = Eigen::Matrix3d::Identity();
};

struct PlanePixelPair {
  Eigen::Vector2d plane;
  PixelPoint pixel;
};

/// Tag corners in the tag frame, in observation order
/// (top-left, top-right, bottom-right, bottom-left).
std::array<Eigen::Vector3d, 4> tag_corners_3d(double tag_size);

/// Normalized DLT. Throws RankDeficiency for fewer than four pairs or
/// (near-)collinear plane points.
Homography homography_dlt(std::span<const PlanePixelPair> pairs);

/// Decomposes a homography that maps canonical tag coordinates (corners at
/// (+-1, +-1)) to undistorted pixels into a metric pose.
TagPose pose_from_homography(const Homography& H, const CameraIntrinsics& K, double tag_size);

struct RefinedPose {
  TagPose pose;
  bool degraded = false;  ///< normal equations were singular; pose is the input
  int iterations = 0;
  double initial_rms = 0.0;
  double final_rms = 0.0;
};

inline constexpr int kRefineMaxIterations = 20;
inline constexpr int kRefineMaxHalvings = 10;
inline constexpr double kRefineStepTolerance = 1e-10;

/// Gauss-Newton on the corner reprojection residual (distortion included)
/// over a local increment: rotation left-multiplied by exp(omega), translation
/// shifted by delta_t.
RefinedPose refine_pose(const TagPose& initial, const TagObservation& obs, const CameraIntrinsics& K,
                        double tag_size);

/// Undistort, DLT, decompose, refine.
TagPose estimate_tag_pose(const TagObservation& obs, const CameraIntrinsics& K, double tag_size);

/// Tag centre in the camera frame: x right, y down, z forward, metres.
inline Eigen::Vector3d tag_translation(const TagPose& p) { return p.translation; }

/// Unit vector, camera frame, along which the camera must look to see the
/// tag face squarely; (0,0,1) for a tag facing the camera head-on. This is
/// the printed face's outward normal negated.
Eigen::Vector3d tag_facing_direction(const TagPose& p);

std::array<PixelPoint, 4> predict_corners(const TagPose& p, const CameraIntrinsics& K, double tag_size);

/// Residual ordering is (u0, v0, u1, v1, ...), predicted minus observed.
Eigen::Matrix<double, 8, 1> corner_residual(const TagPose& p, const TagObservation& obs,
                                           const CameraIntrinsics& K, double tag_size);

/// d(predicted corners)/d(omega, delta_t) at zero increment.
CornerJacobian corner_jacobian(const TagPose& p, const CameraIntrinsics& K, double tag_size);

TagPose apply_increment(const TagPose& p, const Vector6d& delta);

double reprojection_error_rms(const TagPose& p, const TagObservation& obs, const CameraIntrinsics& K,
                              double tag_size);

/// Geodesic angle between two rotations, radians.
double rotation_angle_between(const Eigen::Matrix3d& a, const Eigen::Matrix3d& b);

/// Closest rotation in the Frobenius sense (SVD polar factor, det corrected).
Eigen::Matrix3d nearest_rotation(const Eigen::Matrix3d& m);

}  // namespace tagnav
