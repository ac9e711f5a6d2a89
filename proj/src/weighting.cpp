#include "planar_init/weighting.hpp"

#include "planar_init/errors.hpp"
#include "planar_init/motion_field.hpp"

#include <algorithm>
#include <cmath>

namespace planar_init {

PixelDeviation stereo_deviation(const StereoObservation& obs, const CameraRig& rig,
                                std::optional<double> depth) {
  const double disparity_px = rig.f * (obs.left.x() - obs.right.x());
  if (!(disparity_px > 0.0)) throw Error(ErrorKind::kInvalidDisparity, "non-positive disparity");
  const double z = depth.value_or(rig.f * rig.baseline / disparity_px);
  if (!(z > 0.0)) throw Error(ErrorKind::kInvalidDisparity, "non-positive depth");
  const Vec3 predicted = z * homogeneous(obs.left) - Vec3(rig.baseline, 0.0, 0.0);
  PixelDeviation dev;
  dev.kind = DeviationKind::kStereo;
  dev.sigma = rig.f * (predicted.head<2>() / predicted.z() - obs.right).norm();
  return dev;
}

PixelDeviation temporal_deviation(const Vec2& obs_k, const Vec2& obs_k1, const Vec3& p_c_k,
                                  const Vec3& v_rel, const Vec3& omega_c, double dt,
                                  const CameraRig& rig) {
  if (!(dt > 0.0)) throw Error(ErrorKind::kTime, "dt must be positive");
  const Vec3 v_c = -v_rel - omega_c.cross(p_c_k);
  const Vec2 v_hat = feature_normalized_velocity(p_c_k, v_c);
  const Vec2 predicted = obs_k + v_hat * dt;
  PixelDeviation dev;
  dev.kind = DeviationKind::kTemporal;
  dev.sigma = rig.f * (predicted - obs_k1).norm();
  return dev;
}

double weight(const PixelDeviation& dev, double floor_px) {
  const double s = std::max(dev.sigma, floor_px);
  return 1.0 / (s * s);
}

Vec2 estimated_flow(const Vec2& /*p_k*/, const Vec2& v_norm, double dt, const CameraRig& rig) {
  return rig.f * v_norm * dt;
}

}  // namespace planar_init
