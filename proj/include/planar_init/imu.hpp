#pragma once

#include "planar_init/geometry.hpp"

#include <span>
#include <vector>

namespace planar_init {

struct ImuSample {
  double t = 0.0;
  Vec3 gyro = Vec3::Zero();   ///< rad/s, body frame
  Vec3 accel = Vec3::Zero();  ///< specific force, m/s^2, body frame
};

/// Body state in the world frame. pose is T_b^w.
struct NavState {
  double t = 0.0;
  Pose pose = Pose::identity(FrameId::world());
  Vec3 velocity = Vec3::Zero();
  Vec3 gyro_bias = Vec3::Zero();
  Vec3 accel_bias = Vec3::Zero();

  static NavState at_rest(double t, const Rotation& attitude = Rotation());
};

struct PriorNormal {
  Vec3 n = Vec3::UnitZ();  ///< unit normal in the current left-camera frame
  double t = 0.0;
};

/// NED gravity, down-positive.
inline Vec3 default_gravity() { return {0.0, 0.0, 9.81}; }

/// Midpoint strapdown integration over the whole stream with constant biases.
/// The first sample must be at state.t. Throws kStream on non-increasing
/// timestamps or a misaligned start.
NavState propagate(const NavState& state, std::span<const ImuSample> samples, const Vec3& gravity);

/// Gyro-integrated body rotation R_{b_end}^{b_start} over the stream.
Rotation integrate_body_rotation(std::span<const ImuSample> samples, const Vec3& gyro_bias);

/// Camera rotation R_{c_{k-1}}^{c_k} between the first and last sample times,
/// conjugated through the camera-to-body extrinsic. Throws kStream on an
/// empty span.
Rotation integrate_camera_rotation(std::span<const ImuSample> samples, const Vec3& gyro_bias,
                                   const Pose& T_cb);

/// n_k = R n_{k-1}, renormalized.
PriorNormal propagate_normal(const PriorNormal& previous, const Rotation& R, double t);

/// Samples covering [t0, t1]; endpoints that fall between samples are linearly
/// interpolated so consecutive slices share their boundary sample exactly.
std::vector<ImuSample> slice(std::span<const ImuSample> samples, double t0, double t1);

struct StationarityOptions {
  double window_s = 0.5;
  double accel_tolerance_g = 0.05;
  double gyro_threshold = 0.03;  ///< rad/s, applied to the window mean
};

struct StationaryWindow {
  bool found = false;
  double t_begin = 0.0;
  double t_end = 0.0;
  Vec3 mean_accel = Vec3::Zero();
  Vec3 mean_gyro = Vec3::Zero();
};

/// First window of the stream whose mean specific force is within the tolerance
/// of |g| and whose mean angular rate is below the threshold.
StationaryWindow detect_stationary(std::span<const ImuSample> samples, double gravity_norm,
                                   const StationarityOptions& options);

/// Roll and pitch from a mean specific force at rest (yaw = 0).
Rotation gravity_aligned_attitude(const Vec3& mean_accel);

}  // namespace planar_init
