#include "tagnav/camera_model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <ostream>

#include <Eigen/LU>

#include "tagnav/error.hpp"
#include "text_util.hpp"

namespace tagnav {

void SensorSpec::validate() const {
  if (!(focal_length_mm > 0.0) || !(sensor_width_mm > 0.0) || !(sensor_height_mm > 0.0) ||
      width_px <= 0 || height_px <= 0) {
    throw InvalidArgument("sensor spec fields must all be strictly positive");
  }
}

void CameraIntrinsics::validate() const {
  if (width <= 0 || height <= 0) throw InvalidArgument("image size must be positive");
  if (!(fx > 0.0) || !(fy > 0.0)) throw InvalidArgument("focal lengths must be positive");
  if (!(cx >= 0.0 && cx <= width) || !(cy >= 0.0 && cy <= height)) {
    throw InvalidArgument("principal point must lie inside the image");
  }
  const auto& d = distortion;
  if (!std::isfinite(d.k1) || !std::isfinite(d.k2) || !std::isfinite(d.p1) || !std::isfinite(d.p2)) {
    throw InvalidArgument("distortion coefficients must be finite");
  }
}

Eigen::Matrix3d CameraIntrinsics::matrix() const {
  Eigen::Matrix3d K;
  K << fx, 0.0, cx, 0.0, fy, cy, 0.0, 0.0, 1.0;
  return K;
}

Eigen::Vector2d focal_from_sensor(const SensorSpec& spec) {
  spec.validate();
  return {spec.focal_length_mm * spec.width_px / spec.sensor_width_mm,
          spec.focal_length_mm * spec.height_px / spec.sensor_height_mm};
}

PixelPoint default_principal_point(int width, int height) {
  if (width <= 0 || height <= 0) throw InvalidArgument("image size must be positive");
  return {width / 2.0, height / 2.0};
}

CameraIntrinsics intrinsics_from_sensor(const SensorSpec& spec, const Distortion& distortion) {
  const Eigen::Vector2d f = focal_from_sensor(spec);
  const PixelPoint c = default_principal_point(spec.width_px, spec.height_px);
  CameraIntrinsics K{spec.width_px, spec.height_px, c.u, c.v, f.x(), f.y(), distortion};
  K.validate();
  return K;
}

Eigen::Vector2d distort_normalized(const Eigen::Vector2d& xn, const Distortion& d) {
  const double x = xn.x();
  const double y = xn.y();
  const double r2 = x * x + y * y;
  const double radial = 1.0 + d.k1 * r2 + d.k2 * r2 * r2;
  return {x * radial + 2.0 * d.p1 * x * y + d.p2 * (r2 + 2.0 * x * x),
          y * radial + d.p1 * (r2 + 2.0 * y * y) + 2.0 * d.p2 * x * y};
}

Eigen::Matrix2d distort_jacobian(const Eigen::Vector2d& xn, const Distortion& d) {
  const double x = xn.x();
  const double y = xn.y();
  const double r2 = x * x + y * y;
  const double radial = 1.0 + d.k1 * r2 + d.k2 * r2 * r2;
  const double dradial = 2.0 * d.k1 + 4.0 * d.k2 * r2;  // d(radial)/d(x) = dradial * x
  Eigen::Matrix2d J;
  J(0, 0) = radial + dradial * x * x + 2.0 * d.p1 * y + 6.0 * d.p2 * x;
  J(0, 1) = dradial * x * y + 2.0 * d.p1 * x + 2.0 * d.p2 * y;
  J(1, 0) = dradial * x * y + 2.0 * d.p1 * x + 2.0 * d.p2 * y;
  J(1, 1) = radial + dradial * y * y + 6.0 * d.p1 * y + 2.0 * d.p2 * x;
  return J;
}

PixelPoint project(const Eigen::Vector3d& p, const CameraIntrinsics& K) {
  if (!(p.z() > 0.0)) throw BehindCamera("point is not in front of the camera");
  const Eigen::Vector2d xd = distort_normalized({p.x() / p.z(), p.y() / p.z()}, K.distortion);
  return {K.fx * xd.x() + K.cx, K.fy * xd.y() + K.cy};
}

PixelPoint undistort_point(const PixelPoint& p, const CameraIntrinsics& K) {
  if (!std::isfinite(p.u) || !std::isfinite(p.v)) throw InvalidArgument("pixel is not finite");
  if (K.distortion.is_zero()) return p;

  const Eigen::Vector2d target{(p.u - K.cx) / K.fx, (p.v - K.cy) / K.fy};
  const auto& d = K.distortion;
  Eigen::Vector2d x = target;
  for (int it = 0; it <= kUndistortMaxIterations; ++it) {
    const Eigen::Vector2d residual = distort_normalized(x, d) - target;
    if (std::abs(residual.x() * K.fx) < kUndistortTolerancePx &&
        std::abs(residual.y() * K.fy) < kUndistortTolerancePx) {
      return {K.fx * x.x() + K.cx, K.fy * x.y() + K.cy};
    }
    if (it == kUndistortMaxIterations) break;
    // Newton step on the residual; the plain radial fixed point stalls near the corners for strong barrel distortion.
    const Eigen::Matrix2d J = distort_jacobian(x, d);
    const double det = J.determinant();
    if (std::abs(det) > 1e-12) {
      x -= J.inverse() * residual;
    } else {
      const double r2 = x.squaredNorm();
      const double radial = 1.0 + d.k1 * r2 + d.k2 * r2 * r2;
      const double tx = 2.0 * d.p1 * x.x() * x.y() + d.p2 * (r2 + 2.0 * x.x() * x.x());
      const double ty = d.p1 * (r2 + 2.0 * x.y() * x.y()) + 2.0 * d.p2 * x.x() * x.y();
      if (!(std::abs(radial) > 1e-12)) break;
      x = Eigen::Vector2d{(target.x() - tx) / radial, (target.y() - ty) / radial};
    }
    if (!x.allFinite()) break;
  }
  throw NumericalFailure("undistortion did not converge");
}

TagObservation undistort_observation(const TagObservation& obs, const CameraIntrinsics& K) {
  TagObservation out = obs;
  for (auto& c : out.corners) c = undistort_point(c, K);
  return out;
}

CameraIntrinsics parse_intrinsics(std::istream& in) {
  std::map<std::string, double, std::less<>> values;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    auto body = detail::trim(line);
    if (body.empty() || body.front() == '#') continue;
    const auto sep = body.find_first_of(" \t=:");
    if (sep == std::string_view::npos) {
      throw FormatError("line " + std::to_string(lineno) + ": expected `key value`");
    }
    const auto key = detail::trim(body.substr(0, sep));
    static constexpr std::string_view kKeys[] = {"image_width", "image_height", "cx", "cy", "fx",
                                                 "fy",          "k1",           "k2", "p1", "p2"};
    if (std::find(std::begin(kKeys), std::end(kKeys), key) == std::end(kKeys)) {
      throw FormatError("line " + std::to_string(lineno) + ": unknown key " + std::string(key));
    }
    auto rest = detail::trim(body.substr(sep + 1));
    if (!rest.empty() && (rest.front() == '=' || rest.front() == ':')) rest = detail::trim(rest.substr(1));
    const auto value = detail::parse_double(rest);
    if (!value) throw FormatError("line " + std::to_string(lineno) + ": bad number for " + std::string(key));
    values[std::string(key)] = *value;
  }

  auto require = [&](const char* key) {
    auto it = values.find(key);
    if (it == values.end()) throw FormatError(std::string("missing key ") + key);
    return it->second;
  };
  auto optional = [&](const char* key, double fallback) {
    auto it = values.find(key);
    return it == values.end() ? fallback : it->second;
  };

  CameraIntrinsics K;
  const double w = require("image_width");
  const double h = require("image_height");
  if (w != std::floor(w) || h != std::floor(h)) throw FormatError("image size must be integral");
  K.width = static_cast<int>(w);
  K.height = static_cast<int>(h);
  const PixelPoint c = default_principal_point(K.width, K.height);
  K.cx = optional("cx", c.u);
  K.cy = optional("cy", c.v);
  K.fx = require("fx");
  K.fy = require("fy");
  K.distortion = {optional("k1", 0.0), optional("k2", 0.0), optional("p1", 0.0), optional("p2", 0.0)};
  K.validate();
  return K;
}

void write_intrinsics(std::ostream& out, const CameraIntrinsics& K) {
  using detail::format_double;
  out << "image_width " << K.width << '\n'
      << "image_height " << K.height << '\n'
      << "cx " << format_double(K.cx) << '\n'
      << "cy " << format_double(K.cy) << '\n'
      << "fx " << format_double(K.fx) << '\n'
      << "fy " << format_double(K.fy) << '\n'
      << "k1 " << format_double(K.distortion.k1) << '\n'
      << "k2 " << format_double(K.distortion.k2) << '\n'
      << "p1 " << format_double(K.distortion.p1) << '\n'
      << "p2 " << format_double(K.distortion.p2) << '\n';
}

CameraIntrinsics load_intrinsics(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open intrinsics file " + path);
  return parse_intrinsics(in);
}

void save_intrinsics(const std::string& path, const CameraIntrinsics& K) {
  std::ofstream out(path);
  if (!out) throw FormatError("cannot write intrinsics file " + path);
  write_intrinsics(out, K);
}

SensorSpec default_tello_sensor() { return {4.0, 4.0, 3.0, 960, 720}; }

CameraIntrinsics default_tello_intrinsics() { return intrinsics_from_sensor(default_tello_sensor()); }

}  // namespace tagnav
