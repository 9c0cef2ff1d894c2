#pragma once

#include <Eigen/Core>

namespace tagnav {

/// Camera frame as reported by the pose estimator: x right, y down, z forward.
struct CameraVector {
  double right = 0.0;
  double down = 0.0;
  double forward = 0.0;

  static CameraVector from(const Eigen::Vector3d& v) { return {v.x(), v.y(), v.z()}; }
  Eigen::Vector3d vec() const { return {right, down, forward}; }
  friend bool operator==(const CameraVector&, const CameraVector&) = default;
};

/// Drone body frame used by movement commands: x forward, y right, z down.
struct DroneVector {
  double forward = 0.0;
  double right = 0.0;
  double down = 0.0;

  Eigen::Vector3d vec() const { return {forward, right, down}; }
  double norm() const { return vec().norm(); }
  friend bool operator==(const DroneVector&, const DroneVector&) = default;
};

/// (x', y', z') in the camera frame becomes (z', x', y') in the drone frame.
DroneVector camera_to_drone(const CameraVector& v);
CameraVector drone_to_camera(const DroneVector& v);

/// Drops the gravity-aligned component: (forward, right).
Eigen::Vector2d horizontal(const DroneVector& v);

inline constexpr double kAngleEpsilon = 1e-12;

/// Unsigned angle in [0, pi]. Throws UndefinedAngle if either vector is
/// shorter than kAngleEpsilon.
double angle_between(const Eigen::Vector2d& a, const Eigen::Vector2d& b);

/// Clockwise-positive yaw command that turns the drone's forward axis onto
/// the tag facing direction. Both inputs are horizontal (forward, right)
/// vectors. Antiparallel inputs return +pi.
double signed_turn_to_face(const Eigen::Vector2d& camera_forward, const Eigen::Vector2d& tag_facing);

/// Re-expresses a body-frame vector after the body yaws clockwise by theta.
DroneVector rotate_horizontal(const DroneVector& v, double theta_cw);

/// Wraps an angle into (-pi, pi].
double normalize_angle(double a);

}  // namespace tagnav
