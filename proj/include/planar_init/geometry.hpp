#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <string>

namespace planar_init {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat2 = Eigen::Matrix2d;
using Mat3 = Eigen::Matrix3d;

/// Skew-symmetric matrix such that skew(a) * b == a.cross(b).
Mat3 skew(const Vec3& v);

/// SO(3) element stored as a unit quaternion. Every constructor and operator
/// renormalizes, so long composition chains do not drift off the manifold.
class Rotation {
 public:
  Rotation() : q_(Eigen::Quaterniond::Identity()) {}
  explicit Rotation(const Eigen::Quaterniond& q);

  static Rotation identity() { return {}; }
  /// Projects an arbitrary 3x3 matrix onto the closest rotation (SVD).
  static Rotation from_matrix(const Mat3& m);
  static Rotation from_axis_angle(const Vec3& axis, double angle);
  /// Exponential map of a rotation vector (axis * angle).
  static Rotation exp(const Vec3& rotation_vector);
  static Rotation about_x(double angle) { return from_axis_angle(Vec3::UnitX(), angle); }
  static Rotation about_y(double angle) { return from_axis_angle(Vec3::UnitY(), angle); }
  static Rotation about_z(double angle) { return from_axis_angle(Vec3::UnitZ(), angle); }
  /// NED / ZYX convention: R = Rz(yaw) * Ry(pitch) * Rx(roll).
  static Rotation from_euler_ned(double roll, double pitch, double yaw);

  const Eigen::Quaterniond& quaternion() const { return q_; }
  Mat3 matrix() const { return q_.toRotationMatrix(); }
  Rotation inverse() const { return Rotation(q_.conjugate()); }
  Vec3 log() const;
  double angle() const;

  Rotation operator*(const Rotation& other) const { return Rotation(q_ * other.q_); }
  Vec3 operator*(const Vec3& v) const { return q_ * v; }

 private:
  Eigen::Quaterniond q_;
};

/// Angle of R_a^T * R_b.
double angular_distance(const Rotation& a, const Rotation& b);

enum class FrameKind { kCamera, kBody, kWorld };

/// Frame label carried by poses. The index distinguishes keyframes
/// (c_i vs c_j); -1 means "unindexed".
struct FrameId {
  FrameKind kind = FrameKind::kWorld;
  int index = -1;

  static FrameId camera(int index = -1) { return {FrameKind::kCamera, index}; }
  static FrameId body(int index = -1) { return {FrameKind::kBody, index}; }
  static FrameId world() { return {FrameKind::kWorld, -1}; }

  bool operator==(const FrameId&) const = default;
  std::string str() const;
};

/// Pose T_of^in: maps coordinates in frame `of` into frame `in`,
/// x_in = R * x_of + t.
struct Pose {
  Rotation rotation;
  Vec3 translation = Vec3::Zero();
  FrameId of;
  FrameId in;

  static Pose identity(FrameId frame) { return {Rotation(), Vec3::Zero(), frame, frame}; }

  Vec3 operator*(const Vec3& x) const { return rotation * x + translation; }
  Eigen::Matrix4d matrix() const;
};

/// T_C^B = T_A^B * T_C^A. Throws kLabeledFrame unless a.of == b.in.
Pose compose(const Pose& a, const Pose& b);
Pose invert(const Pose& pose);

struct EulerNed {
  double roll = 0.0;
  double pitch = 0.0;
  double yaw = 0.0;
  /// |pitch| == pi/2; yaw is set to 0 and roll absorbs the ambiguity.
  bool gimbal_lock = false;
};

EulerNed to_euler_ned(const Rotation& r);

/// Rectified stereo rig. The right camera sits at +baseline along the left
/// camera's x axis; T_cb is the left camera pose in the body frame.
struct CameraRig {
  double f = 400.0;
  double cx = 640.0;
  double cy = 400.0;
  double baseline = 0.1;
  int width = 1280;
  int height = 800;
  Pose T_cb{Rotation(), Vec3::Zero(), FrameId::camera(), FrameId::body()};

  /// Checks f > 0, baseline > 0, principal point inside the image; throws kConfig.
  void validate() const;
  bool in_image(const Vec2& pixel) const;
};

/// Downward-looking rig used by the simulator and as the CLI default:
/// optical axis along body z (down), image x along body y.
CameraRig default_rig();

/// Pinhole projection of a camera-frame point; throws kBehindCamera if z <= 0.
Vec2 project(const CameraRig& rig, const Vec3& p_c);
Vec2 normalize(const CameraRig& rig, const Vec2& pixel);
Vec3 homogeneous(const Vec2& p);
Vec2 denormalize(const CameraRig& rig, const Vec2& normalized);

}  // namespace planar_init
