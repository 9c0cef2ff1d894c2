#include "tagnav/tag_pose.hpp"

#include <Eigen/Dense>
#include <Eigen/SVD>
#include <cmath>
#include <limits>

#include "tagnav/error.hpp"

namespace tagnav {
namespace {

Eigen::Matrix3d skew(const Eigen::Vector3d& w) {
  Eigen::Matrix3d S;
  S << 0.0, -w.z(), w.y(), w.z(), 0.0, -w.x(), -w.y(), w.x(), 0.0;
  return S;
}

Eigen::Matrix3d exp_so3(const Eigen::Vector3d& w) {
  const double angle = w.norm();
  if (angle == 0.0) return Eigen::Matrix3d::Identity();
  return Eigen::AngleAxisd(angle, w / angle).toRotationMatrix();
}

// Similarity that moves the centroid to the origin and the RMS radius to sqrt(2).
Eigen::Matrix3d hartley_transform(const std::vector<Eigen::Vector2d>& pts) {
  Eigen::Vector2d centroid = Eigen::Vector2d::Zero();
  for (const auto& p : pts) centroid += p;
  centroid /= static_cast<double>(pts.size());
  double sq = 0.0;
  for (const auto& p : pts) sq += (p - centroid).squaredNorm();
  const double rms = std::sqrt(sq / static_cast<double>(pts.size()));
  if (!(rms > 0.0)) throw RankDeficiency("all points coincide");
  const double s = std::sqrt(2.0) / rms;
  Eigen::Matrix3d T;
  T << s, 0.0, -s * centroid.x(), 0.0, s, -s * centroid.y(), 0.0, 0.0, 1.0;
  return T;
}

double cost_of(const TagPose& p, const TagObservation& obs, const CameraIntrinsics& K, double tag_size) {
  for (const auto& X : tag_corners_3d(tag_size)) {
    if (!((p.rotation * X + p.translation).z() > 0.0)) return std::numeric_limits<double>::infinity();
  }
  return corner_residual(p, obs, K, tag_size).squaredNorm();
}

}  // namespace

void TagPose::validate() const {
  const Eigen::Matrix3d RtR = rotation.transpose() * rotation;
  if ((RtR - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff() > 1e-9) {
    throw InvalidArgument("pose rotation is not orthonormal");
  }
  if (std::abs(rotation.determinant() - 1.0) > 1e-9) throw InvalidArgument("pose rotation has det != 1");
  if (!translation.allFinite() || !(translation.z() > 0.0)) {
    throw InvalidArgument("pose translation must be finite with z > 0");
  }
}

std::array<Eigen::Vector3d, 4> tag_corners_3d(double tag_size) {
  if (!(tag_size > 0.0)) throw InvalidArgument("tag size must be positive");
  const double h = tag_size / 2.0;
  return {Eigen::Vector3d{-h, -h, 0.0}, Eigen::Vector3d{h, -h, 0.0}, Eigen::Vector3d{h, h, 0.0},
          Eigen::Vector3d{-h, h, 0.0}};
}

Homography homography_dlt(std::span<const PlanePixelPair> pairs) {
  const std::size_t n = pairs.size();
  if (n < 4) throw RankDeficiency("homography needs at least four correspondences");

  std::vector<Eigen::Vector2d> plane(n);
  std::vector<Eigen::Vector2d> image(n);
  for (std::size_t i = 0; i < n; ++i) {
    plane[i] = pairs[i].plane;
    image[i] = {pairs[i].pixel.u, pairs[i].pixel.v};
    if (!plane[i].allFinite() || !image[i].allFinite()) throw InvalidArgument("non-finite correspondence");
  }
  const Eigen::Matrix3d Tp = hartley_transform(plane);
  const Eigen::Matrix3d Ti = hartley_transform(image);

  // Collinear plane triples make the map non-unique.
  for (std::size_t a = 0; a < n; ++a) {
    for (std::size_t b = a + 1; b < n; ++b) {
      for (std::size_t c = b + 1; c < n; ++c) {
        const Eigen::Vector2d ab = (Tp * plane[b].homogeneous() - Tp * plane[a].homogeneous()).head<2>();
        const Eigen::Vector2d ac = (Tp * plane[c].homogeneous() - Tp * plane[a].homogeneous()).head<2>();
        if (n == 4 && std::abs(ab.x() * ac.y() - ab.y() * ac.x()) < 1e-10) {
          throw RankDeficiency("plane points are collinear");
        }
      }
    }
  }

  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(2 * n), 9);
  for (std::size_t i = 0; i < n; ++i) {
    const Eigen::Vector3d p = Tp * plane[i].homogeneous();
    const Eigen::Vector3d q = Ti * image[i].homogeneous();
    const double x = p.x(), y = p.y(), u = q.x(), v = q.y();
    const auto r = static_cast<Eigen::Index>(2 * i);
    A.row(r) << 0.0, 0.0, 0.0, -x, -y, -1.0, v * x, v * y, v;
    A.row(r + 1) << x, y, 1.0, 0.0, 0.0, 0.0, -u * x, -u * y, -u;
  }

  Eigen::JacobiSVD<Eigen::MatrixXd> svd(A, Eigen::ComputeFullV);
  const auto& sv = svd.singularValues();
  // The 8th singular value must be clearly non-zero for a unique null vector.
  if (sv.size() < 8 || sv(7) <= 1e-10 * sv(0)) throw RankDeficiency("degenerate homography configuration");
  const Eigen::VectorXd h = svd.matrixV().col(8);

  Eigen::Matrix3d Hn;
  Hn << h(0), h(1), h(2), h(3), h(4), h(5), h(6), h(7), h(8);
  Eigen::Matrix3d H = Ti.inverse() * Hn * Tp;
  if (std::abs(H(2, 2)) > 1e-14 * H.norm()) {
    H /= H(2, 2);
  } else {
    H /= H.norm();
  }
  return {H};
}

Eigen::Matrix3d nearest_rotation(const Eigen::Matrix3d& m) {
  Eigen::JacobiSVD<Eigen::Matrix3d> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Eigen::Matrix3d U = svd.matrixU();
  const Eigen::Matrix3d V = svd.matrixV();
  Eigen::Matrix3d D = Eigen::Matrix3d::Identity();
  D(2, 2) = (U * V.transpose()).determinant() < 0.0 ? -1.0 : 1.0;
  return U * D * V.transpose();
}

TagPose pose_from_homography(const Homography& H, const CameraIntrinsics& K, double tag_size) {
  if (!(tag_size > 0.0)) throw InvalidArgument("tag size must be positive");
  K.validate();
  const Eigen::Matrix3d Kinv = K.matrix().inverse();
  if (!Kinv.allFinite()) throw NumericalFailure("camera matrix is singular");

  Eigen::Matrix3d B = Kinv * H.matrix;
  const double denom = B.col(0).norm() + B.col(1).norm();
  if (!(denom > 1e-300)) throw NumericalFailure("homography has vanishing rotation columns");
  const double lambda = 2.0 / denom;
  if (B(2, 2) * lambda < 0.0) B = -B;

  Eigen::Matrix3d M;
  M.col(0) = lambda * B.col(0);
  M.col(1) = lambda * B.col(1);
  M.col(2) = M.col(0).cross(M.col(1));

  TagPose pose;
  pose.rotation = nearest_rotation(M);
  // Canonical tag coordinates span [-1, 1]; one unit is half the side.
  pose.translation = lambda * B.col(2) * (tag_size / 2.0);
  return pose;
}

std::array<PixelPoint, 4> predict_corners(const TagPose& p, const CameraIntrinsics& K, double tag_size) {
  const auto corners = tag_corners_3d(tag_size);
  std::array<PixelPoint, 4> out;
  for (std::size_t i = 0; i < 4; ++i) out[i] = project(p.rotation * corners[i] + p.translation, K);
  return out;
}

Eigen::Matrix<double, 8, 1> corner_residual(const TagPose& p, const TagObservation& obs,
                                           const CameraIntrinsics& K, double tag_size) {
  const auto pred = predict_corners(p, K, tag_size);
  Eigen::Matrix<double, 8, 1> r;
  for (std::size_t i = 0; i < 4; ++i) {
    r(2 * i) = pred[i].u - obs.corners[i].u;
    r(2 * i + 1) = pred[i].v - obs.corners[i].v;
  }
  return r;
}

CornerJacobian corner_jacobian(const TagPose& p, const CameraIntrinsics& K, double tag_size) {
  const auto corners = tag_corners_3d(tag_size);
  CornerJacobian J;
  for (std::size_t i = 0; i < 4; ++i) {
    const Eigen::Vector3d rotated = p.rotation * corners[i];
    const Eigen::Vector3d Xc = rotated + p.translation;
    const double z = Xc.z();
    if (!(z > 0.0)) throw BehindCamera("corner behind camera while linearizing");
    Eigen::Matrix<double, 2, 3> dn;
    dn << 1.0 / z, 0.0, -Xc.x() / (z * z), 0.0, 1.0 / z, -Xc.y() / (z * z);
    const Eigen::Matrix2d dd = distort_jacobian({Xc.x() / z, Xc.y() / z}, K.distortion);
    const Eigen::Matrix<double, 2, 3> dpix = Eigen::Vector2d{K.fx, K.fy}.asDiagonal() * dd * dn;

    Eigen::Matrix<double, 3, 6> dX;
    dX.leftCols<3>() = -skew(rotated);
    dX.rightCols<3>().setIdentity();
    J.block<2, 6>(static_cast<Eigen::Index>(2 * i), 0) = dpix * dX;
  }
  return J;
}

TagPose apply_increment(const TagPose& p, const Vector6d& delta) {
  TagPose out;
  out.rotation = exp_so3(delta.head<3>()) * p.rotation;
  out.translation = p.translation + delta.tail<3>();
  return out;
}

RefinedPose refine_pose(const TagPose& initial, const TagObservation& obs, const CameraIntrinsics& K,
                        double tag_size) {
  RefinedPose result;
  result.pose = initial;
  double cost = cost_of(initial, obs, K, tag_size);
  if (!std::isfinite(cost)) throw InvalidArgument("initial pose places the tag behind the camera");
  result.initial_rms = std::sqrt(cost / 8.0);
  result.final_rms = result.initial_rms;

  TagPose pose = initial;
  for (int iter = 0; iter < kRefineMaxIterations && cost > 0.0; ++iter) {
    const CornerJacobian J = corner_jacobian(pose, K, tag_size);
    const Eigen::Matrix<double, 8, 1> r = corner_residual(pose, obs, K, tag_size);
    const Eigen::Matrix<double, 6, 6> JtJ = J.transpose() * J;
    Eigen::LDLT<Eigen::Matrix<double, 6, 6>> ldlt(JtJ);
    if (ldlt.info() != Eigen::Success || !ldlt.isPositive() || !(ldlt.rcond() > 1e-15)) {
      result.pose = initial;
      result.degraded = true;
      result.final_rms = result.initial_rms;
      result.iterations = iter;
      return result;
    }
    const Vector6d step = ldlt.solve(-J.transpose() * r);

    double scale = 1.0;
    bool accepted = false;
    TagPose candidate;
    double candidate_cost = cost;
    for (int h = 0; h <= kRefineMaxHalvings; ++h) {
      candidate = apply_increment(pose, scale * step);
      candidate_cost = cost_of(candidate, obs, K, tag_size);
      if (candidate_cost <= cost) {
        accepted = true;
        break;
      }
      scale *= 0.5;
    }
    result.iterations = iter + 1;
    if (!accepted) break;
    pose = candidate;
    cost = candidate_cost;
    if ((scale * step).norm() < kRefineStepTolerance) break;
  }

  result.pose = pose;
  result.final_rms = std::sqrt(cost / 8.0);
  return result;
}

TagPose estimate_tag_pose(const TagObservation& obs, const CameraIntrinsics& K, double tag_size) {
  obs.validate();
  K.validate();
  if (!(tag_size > 0.0)) throw InvalidArgument("tag size must be positive");

  const TagObservation undistorted = undistort_observation(obs, K);
  static const std::array<Eigen::Vector2d, 4> kCanonical{
      Eigen::Vector2d{-1.0, -1.0}, Eigen::Vector2d{1.0, -1.0}, Eigen::Vector2d{1.0, 1.0},
      Eigen::Vector2d{-1.0, 1.0}};
  std::array<PlanePixelPair, 4> pairs;
  for (std::size_t i = 0; i < 4; ++i) pairs[i] = {kCanonical[i], undistorted.corners[i]};

  const Homography H = homography_dlt(pairs);
  const TagPose initial = pose_from_homography(H, K, tag_size);
  return refine_pose(initial, obs, K, tag_size).pose;
}

Eigen::Vector3d tag_facing_direction(const TagPose& p) {
  const Eigen::Vector3d outward_normal = -(p.rotation * Eigen::Vector3d::UnitZ());
  return -outward_normal.normalized();
}

double reprojection_error_rms(const TagPose& p, const TagObservation& obs, const CameraIntrinsics& K,
                              double tag_size) {
  return std::sqrt(corner_residual(p, obs, K, tag_size).squaredNorm() / 8.0);
}

double rotation_angle_between(const Eigen::Matrix3d& a, const Eigen::Matrix3d& b) {
  return Eigen::AngleAxisd(Eigen::Matrix3d(a * b.transpose())).angle();
}

}  // namespace tagnav
