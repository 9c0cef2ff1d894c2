#include "tagnav/frame_transforms.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "tagnav/error.hpp"

namespace tagnav {

DroneVector camera_to_drone(const CameraVector& v) { return {v.forward, v.right, v.down}; }

CameraVector drone_to_camera(const DroneVector& v) { return {v.right, v.down, v.forward}; }

Eigen::Vector2d horizontal(const DroneVector& v) { return {v.forward, v.right}; }

double angle_between(const Eigen::Vector2d& a, const Eigen::Vector2d& b) {
  const double na = a.norm();
  const double nb = b.norm();
  if (!(na > kAngleEpsilon) || !(nb > kAngleEpsilon)) throw UndefinedAngle("angle of a zero-length vector");
  const double c = std::clamp(a.dot(b) / (na * nb), -1.0, 1.0);
  return std::acos(c);
}

double signed_turn_to_face(const Eigen::Vector2d& camera_forward, const Eigen::Vector2d& tag_facing) {
  const double magnitude = angle_between(camera_forward, tag_facing);
  const double cross = camera_forward.x() * tag_facing.y() - camera_forward.y() * tag_facing.x();
  if (magnitude >= std::numbers::pi) return std::numbers::pi;
  // In (forward, right) coordinates a positive cross product means the
  // target lies to the right, i.e. a clockwise turn.
  return cross >= 0.0 ? magnitude : -magnitude;
}

DroneVector rotate_horizontal(const DroneVector& v, double theta_cw) {
  const double c = std::cos(theta_cw);
  const double s = std::sin(theta_cw);
  return {v.forward * c + v.right * s, -v.forward * s + v.right * c, v.down};
}

double normalize_angle(double a) {
  constexpr double two_pi = 2.0 * std::numbers::pi;
  double r = std::fmod(a, two_pi);
  if (r <= -std::numbers::pi) r += two_pi;
  if (r > std::numbers::pi) r -= two_pi;
  return r;
}

}  // namespace tagnav
