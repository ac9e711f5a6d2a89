#include "planar_init/geometry.hpp"

#include "planar_init/errors.hpp"

#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <numbers>

namespace planar_init {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kLabeledFrame: return "labeled-frame";
    case ErrorKind::kBehindCamera: return "behind-camera";
    case ErrorKind::kInvalidPlane: return "invalid-plane";
    case ErrorKind::kInsufficientData: return "insufficient-data";
    case ErrorKind::kDegenerateEstimation: return "degenerate-estimation";
    case ErrorKind::kDegenerateHomography: return "degenerate-homography";
    case ErrorKind::kInconsistentData: return "inconsistent-data";
    case ErrorKind::kStream: return "stream";
    case ErrorKind::kNoSolution: return "no-solution";
    case ErrorKind::kInvalidDisparity: return "invalid-disparity";
    case ErrorKind::kDegeneratePnp: return "degenerate-pnp";
    case ErrorKind::kDegenerateTranslation: return "degenerate-translation";
    case ErrorKind::kHorizonSingularity: return "horizon-singularity";
    case ErrorKind::kZeroDepth: return "zero-depth";
    case ErrorKind::kUnobservableVelocity: return "unobservable-velocity";
    case ErrorKind::kTime: return "time";
    case ErrorKind::kAlignment: return "alignment";
    case ErrorKind::kConfig: return "config";
    case ErrorKind::kIo: return "io";
  }
  return "unknown";
}

Mat3 skew(const Vec3& v) {
  Mat3 m;
  m << 0.0, -v.z(), v.y(),
       v.z(), 0.0, -v.x(),
      -v.y(), v.x(), 0.0;
  return m;
}

Rotation::Rotation(const Eigen::Quaterniond& q) : q_(q.normalized()) {
  // Canonical hemisphere keeps equal rotations bit-comparable.
  if (q_.w() < 0.0) q_.coeffs() *= -1.0;
}

Rotation Rotation::from_matrix(const Mat3& m) {
  Eigen::JacobiSVD<Mat3> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Mat3 d = Mat3::Identity();
  if ((svd.matrixU() * svd.matrixV().transpose()).determinant() < 0.0) d(2, 2) = -1.0;
  const Mat3 r = svd.matrixU() * d * svd.matrixV().transpose();
  return Rotation(Eigen::Quaterniond(r));
}

Rotation Rotation::from_axis_angle(const Vec3& axis, double angle) {
  return Rotation(Eigen::Quaterniond(Eigen::AngleAxisd(angle, axis.normalized())));
}

Rotation Rotation::exp(const Vec3& rotation_vector) {
  const double theta = rotation_vector.norm();
  if (theta < 1e-12) {
    // Second-order expansion; exact to machine precision at this size.
    Eigen::Quaterniond q(1.0, 0.5 * rotation_vector.x(), 0.5 * rotation_vector.y(),
                         0.5 * rotation_vector.z());
    return Rotation(q);
  }
  return Rotation(Eigen::Quaterniond(Eigen::AngleAxisd(theta, rotation_vector / theta)));
}

Rotation Rotation::from_euler_ned(double roll, double pitch, double yaw) {
  return about_z(yaw) * about_y(pitch) * about_x(roll);
}

Vec3 Rotation::log() const {
  const Vec3 v = q_.vec();
  const double s = v.norm();
  if (s < 1e-12) return 2.0 * v;
  const double theta = 2.0 * std::atan2(s, q_.w());
  return v * (theta / s);
}

double Rotation::angle() const { return log().norm(); }

double angular_distance(const Rotation& a, const Rotation& b) { return (a.inverse() * b).angle(); }

std::string FrameId::str() const {
  std::string s;
  switch (kind) {
    case FrameKind::kCamera: s = "c"; break;
    case FrameKind::kBody: s = "b"; break;
    case FrameKind::kWorld: s = "w"; break;
  }
  if (index >= 0) s += std::to_string(index);
  return s;
}

Eigen::Matrix4d Pose::matrix() const {
  Eigen::Matrix4d m = Eigen::Matrix4d::Identity();
  m.topLeftCorner<3, 3>() = rotation.matrix();
  m.topRightCorner<3, 1>() = translation;
  return m;
}

Pose compose(const Pose& a, const Pose& b) {
  if (!(a.of == b.in)) {
    throw Error(ErrorKind::kLabeledFrame,
                "cannot compose T_" + a.of.str() + "^" + a.in.str() + " with T_" + b.of.str() + "^" +
                    b.in.str());
  }
  return {a.rotation * b.rotation, a.rotation * b.translation + a.translation, b.of, a.in};
}

Pose invert(const Pose& pose) {
  const Rotation r_inv = pose.rotation.inverse();
  return {r_inv, -(r_inv * pose.translation), pose.in, pose.of};
}

EulerNed to_euler_ned(const Rotation& r) {
  const Mat3 m = r.matrix();
  EulerNed e;
  const double s = std::clamp(-m(2, 0), -1.0, 1.0);
  if (std::abs(s) > 1.0 - 1e-12) {
    e.gimbal_lock = true;
    e.pitch = std::copysign(std::numbers::pi / 2.0, s);
    e.yaw = 0.0;
    e.roll = std::atan2(-m(1, 2), m(1, 1));
    return e;
  }
  e.pitch = std::asin(s);
  e.roll = std::atan2(m(2, 1), m(2, 2));
  e.yaw = std::atan2(m(1, 0), m(0, 0));
  return e;
}

void CameraRig::validate() const {
  if (!(f > 0.0)) throw Error(ErrorKind::kConfig, "focal length must be positive");
  if (!(baseline > 0.0)) throw Error(ErrorKind::kConfig, "baseline must be positive");
  if (width <= 0 || height <= 0) throw Error(ErrorKind::kConfig, "image size must be positive");
  if (!(cx >= 0.0 && cx <= width && cy >= 0.0 && cy <= height)) {
    throw Error(ErrorKind::kConfig, "principal point outside the image");
  }
  if (!(T_cb.of.kind == FrameKind::kCamera && T_cb.in.kind == FrameKind::kBody)) {
    throw Error(ErrorKind::kLabeledFrame, "rig extrinsic must be T_c^b");
  }
}

bool CameraRig::in_image(const Vec2& pixel) const {
  return pixel.x() >= 0.0 && pixel.x() < width && pixel.y() >= 0.0 && pixel.y() < height;
}

CameraRig default_rig() {
  CameraRig rig;
  rig.f = 400.0;
  rig.cx = 640.0;
  rig.cy = 400.0;
  rig.baseline = 0.1;
  rig.width = 1280;
  rig.height = 800;
  rig.T_cb = Pose{Rotation::about_z(std::numbers::pi / 2.0), Vec3(0.06, -0.02, 0.05),
                  FrameId::camera(), FrameId::body()};
  return rig;
}

Vec2 project(const CameraRig& rig, const Vec3& p_c) {
  if (!(p_c.z() > 0.0)) throw Error(ErrorKind::kBehindCamera, "point has non-positive depth");
  return {rig.f * p_c.x() / p_c.z() + rig.cx, rig.f * p_c.y() / p_c.z() + rig.cy};
}

Vec2 normalize(const CameraRig& rig, const Vec2& pixel) {
  return {(pixel.x() - rig.cx) / rig.f, (pixel.y() - rig.cy) / rig.f};
}

Vec3 homogeneous(const Vec2& p) { return {p.x(), p.y(), 1.0}; }

Vec2 denormalize(const CameraRig& rig, const Vec2& normalized) {
  return {rig.f * normalized.x() + rig.cx, rig.f * normalized.y() + rig.cy};
}

}  // namespace planar_init
