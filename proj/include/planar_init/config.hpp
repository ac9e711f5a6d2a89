#pragma once

#include "planar_init/geometry.hpp"
#include "planar_init/homography.hpp"
#include "planar_init/imu.hpp"
#include "planar_init/motion_field.hpp"
#include "planar_init/pnp.hpp"
#include "planar_init/weighting.hpp"

#include <filesystem>
#include <string>

namespace planar_init {

struct PipelineConfig {
  double preset_height_m = 1.5;
  int window_size = 10;
  int min_features = 20;
  double min_disparity_px = 1.0;
  /// Homography consensus sized for ~0.5 px tracks; the bare estimator keeps
  /// the tighter noise-free default.
  RansacOptions ransac{.threshold = 6e-3};
  PnpOptions pnp;
  GaussNewtonOptions gn;
  StationarityOptions stationarity;
  DeviationMode deviation = DeviationMode::kDynamic;
  double fixed_deviation_px = 1.5;
  double deviation_floor_px = 0.25;
  /// Below this |t_bar| on every pair the window counts as pure rotation.
  double min_parallax = 5e-3;
  /// Level the anchor camera with the estimated ground normal.
  bool plane_tilt_correction = true;
  /// Height gate reads the stereo altitude when enough ground is visible.
  bool stereo_height_gate = true;
  Vec3 gravity = default_gravity();
  Vec3 gyro_bias = Vec3::Zero();
  Vec3 accel_bias = Vec3::Zero();

  /// Throws kConfig on out-of-range values.
  void validate() const;
};

/// Reads a JSON config; missing keys keep their defaults, unknown keys are
/// rejected. Throws kIo / kConfig.
PipelineConfig load_pipeline_config(const std::filesystem::path& path);
PipelineConfig pipeline_config_from_json(const std::string& text);
std::string pipeline_config_to_json(const PipelineConfig& config);

/// Rig JSON: f, cx, cy, baseline, width, height, T_cb {q: [w,x,y,z], t: [x,y,z]}.
CameraRig rig_from_json(const std::string& text);
std::string rig_to_json(const CameraRig& rig);

std::string_view to_string(DeviationMode mode);
DeviationMode deviation_mode_from_string(std::string_view s);

}  // namespace planar_init
