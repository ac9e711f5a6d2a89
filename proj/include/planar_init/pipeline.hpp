#pragma once

#include "planar_init/config.hpp"
#include "planar_init/imu.hpp"
#include "planar_init/initializer.hpp"
#include "planar_init/metrics.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace planar_init {

/// Take-off phases: wait for rest, propagate on the IMU alone until the
/// height gate, gather the keyframe window, initialize.
enum class Phase { kWaitStationary, kImuPropagation, kGatherWindow, kInitialize, kDone };
std::string_view to_string(Phase phase);

struct PipelineOutput {
  InitializationResult result;
  std::vector<Phase> phases;              ///< phases entered, in order
  std::vector<StateSample> imu_track;     ///< IMU-only state at every frame after rest
  int gate_frame = -1;
  double gate_time = 0.0;
  double rest_time = 0.0;
  std::map<std::string, double> timings_ms;  ///< wall clock per stage
};

/// Camera height above the ground plane from stereo: median of n . X over
/// features with reliable disparity, n the camera-frame ground normal. Empty
/// when fewer than min_points features qualify.
std::optional<double> stereo_altitude(const Keyframe& frame, const CameraRig& rig, const Vec3& n_c,
                                      double min_disparity_px, int min_points);

/// Runs the whole take-off sequence over recorded frames and IMU. Data
/// problems are reported through result.status, never thrown.
PipelineOutput run_pipeline(std::span<const Keyframe> frames, std::span<const ImuSample> imu,
                            const CameraRig& rig, const PipelineConfig& config, std::uint64_t seed);

}  // namespace planar_init
