#pragma once

#include <Eigen/Core>
#include <iosfwd>
#include <string>

#include "tagnav/observation.hpp"

namespace tagnav {

/// Physical description of a camera: lens focal length, active sensor area
/// and pixel resolution along each axis.
struct SensorSpec {
  double focal_length_mm = 0.0;
  double sensor_width_mm = 0.0;
  double sensor_height_mm = 0.0;
  int width_px = 0;
  int height_px = 0;

  void validate() const;
};

/// Radial (k1, k2) and tangential (p1, p2) lens distortion coefficients.
struct Distortion {
  double k1 = 0.0;
  double k2 = 0.0;
  double p1 = 0.0;
  double p2 = 0.0;

  bool is_zero() const { return k1 == 0.0 && k2 == 0.0 && p1 == 0.0 && p2 == 0.0; }

  friend bool operator==(const Distortion&, const Distortion&) = default;
};

struct CameraIntrinsics {
  int width = 0;
  int height = 0;
  double cx = 0.0;
  double cy = 0.0;
  double fx = 0.0;
  double fy = 0.0;
  Distortion distortion{};

  void validate() const;

  /// Pinhole matrix [fx 0 cx; 0 fy cy; 0 0 1], distortion excluded.
  Eigen::Matrix3d matrix() const;

  bool in_frame(const PixelPoint& p) const {
    return p.u >= 0.0 && p.u <= width && p.v >= 0.0 && p.v <= height;
  }

  friend bool operator==(const CameraIntrinsics&, const CameraIntrinsics&) = default;
};

/// Per-axis focal length in pixels: f_mm * resolution_px / sensor_mm.
Eigen::Vector2d focal_from_sensor(const SensorSpec& spec);

/// Image centre, i.e. half the image size on each axis.
PixelPoint default_principal_point(int width, int height);

/// Intrinsics derived from a sensor description, principal point at the
/// image centre.
CameraIntrinsics intrinsics_from_sensor(const SensorSpec& spec, const Distortion& distortion = {});

/// Applies the radial-tangential model to normalized image coordinates.
Eigen::Vector2d distort_normalized(const Eigen::Vector2d& xn, const Distortion& d);

/// 2x2 Jacobian of distort_normalized with respect to xn.
Eigen::Matrix2d distort_jacobian(const Eigen::Vector2d& xn, const Distortion& d);

/// Projects a camera-frame point (x right, y down, z forward; metres) to
/// distorted pixel coordinates. Throws BehindCamera when z <= 0.
PixelPoint project(const Eigen::Vector3d& p, const CameraIntrinsics& K);

/// Inverts the lens distortion for one pixel by fixed-point iteration on
/// normalized coordinates. Throws NumericalFailure when the iteration does
/// not settle within kUndistortMaxIterations.
PixelPoint undistort_point(const PixelPoint& p, const CameraIntrinsics& K);

inline constexpr int kUndistortMaxIterations = 20;
inline constexpr double kUndistortTolerancePx = 1e-10;

TagObservation undistort_observation(const TagObservation& obs, const CameraIntrinsics& K);

// Flat `key value` text config: image_width, image_height, cx, cy, fx, fy,
// k1, k2, p1, p2.
CameraIntrinsics parse_intrinsics(std::istream& in);
void write_intrinsics(std::ostream& out, const CameraIntrinsics& K);
CameraIntrinsics load_intrinsics(const std::string& path);
void save_intrinsics(const std::string& path, const CameraIntrinsics& K);

/// The drone's documented 960x720 camera with a 4 mm lens behind a
/// 4.0 x 3.0 mm active area. The sensor size is a configuration choice.
SensorSpec default_tello_sensor();
CameraIntrinsics default_tello_intrinsics();

}  // namespace tagnav
