#pragma once

#include "planar_init/geometry.hpp"

#include <optional>

namespace planar_init {

enum class DeviationKind { kStereo, kTemporal };

struct PixelDeviation {
  double sigma = 0.0;  ///< pixels
  DeviationKind kind = DeviationKind::kStereo;
  int feature_id = -1;
  int keyframe = -1;
};

enum class DeviationMode { kFixed, kDynamic };

/// Left/right observation of one feature, normalized coordinates.
struct StereoObservation {
  Vec2 left;
  Vec2 right;
};

/// Left-to-right consistency of a stereo pair. The left point is lifted with
/// depth z (stereo depth f b / disparity unless overridden), shifted by the
/// baseline into the right camera and compared with the right observation.
/// Throws kInvalidDisparity for non-positive disparity or depth.
PixelDeviation stereo_deviation(const StereoObservation& obs, const CameraRig& rig,
                                std::optional<double> depth = std::nullopt);

/// Left(k) -> left(k+1) consistency under uniform motion: v_c = -v_rel - omega_c x p_c,
/// its normalized velocity moves p_k for dt and the result is compared with p_k1.
/// Throws kTime for dt <= 0 and kZeroDepth for a zero-depth point.
PixelDeviation temporal_deviation(const Vec2& obs_k, const Vec2& obs_k1, const Vec3& p_c_k,
                                  const Vec3& v_rel, const Vec3& omega_c, double dt,
                                  const CameraRig& rig);

/// Information-style weight 1 / max(sigma, floor)^2.
double weight(const PixelDeviation& dev, double floor_px = 0.25);

/// Pixel displacement f * v * dt predicted from a normalized velocity.
Vec2 estimated_flow(const Vec2& p_k, const Vec2& v_norm, double dt, const CameraRig& rig);

}  // namespace planar_init
