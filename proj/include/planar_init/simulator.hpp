#pragma once

#include "planar_init/geometry.hpp"
#include "planar_init/imu.hpp"
#include "planar_init/initializer.hpp"
#include "planar_init/metrics.hpp"

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace planar_init {

/// Simple polygon in the ground plane (x, y).
struct Polygon {
  std::vector<Vec2> vertices;
  bool contains(const Vec2& p) const;
};

struct SceneConfig {
  std::string preset = "helipad";
  int feature_count = 3000;
  double extent_x = 12.0;  ///< metres, centred on the take-off point
  double extent_y = 12.0;
  double roughness = 0.0;  ///< std-dev of the out-of-plane perturbation, metres
  std::vector<Polygon> dropouts;
  std::uint64_t seed = 1;
};

/// helipad (0 m), asphalt (0.01 m), lawn (0.05 m). Throws kConfig otherwise.
SceneConfig scene_preset(std::string_view name);

struct ScenePoint {
  int id = 0;
  Vec3 p = Vec3::Zero();  ///< scene frame: ground plane z = 0
};

std::vector<ScenePoint> generate_scene(const SceneConfig& config);

enum class ProfileKind { kVertical, kOblique, kHover };
ProfileKind profile_from_string(std::string_view name);
std::string_view to_string(ProfileKind kind);

struct TrajectoryProfile {
  ProfileKind kind = ProfileKind::kVertical;
  double climb_rate = 0.3;     ///< average, m/s
  double climb_height = 3.35;  ///< metres above the rest height
  double tilt = 0.1;           ///< oblique pitch, rad
  double tilt_ramp_s = 2.0;
  double drift = 1.0;          ///< oblique lateral travel, m
  double stationary_s = 1.0;
  double hold_s = 0.5;
  double rest_height = 0.15;   ///< body above ground at rest, m
  double hover_height = 2.0;
  double hover_s = 4.0;
  double camera_rate = 20.0;
  double imu_rate = 200.0;

  double duration() const;
  /// Throws kConfig for non-positive rates or an IMU rate that is not an
  /// integer multiple of the camera rate.
  void validate() const;
};

/// Analytic trajectory state. The world origin is the initial body position
/// (NED); the ground plane sits at z = ground_z below it.
struct TrajectoryPoint {
  double t = 0.0;
  Vec3 p = Vec3::Zero();
  Vec3 v = Vec3::Zero();
  Vec3 a = Vec3::Zero();
  Rotation R_bw;
  Vec3 omega_b = Vec3::Zero();
};

TrajectoryPoint evaluate_trajectory(const TrajectoryProfile& profile, double t);
double ground_z(const TrajectoryProfile& profile);

struct TruthFrame {
  int frame = 0;
  double t = 0.0;
  Pose T_bw{Rotation(), Vec3::Zero(), FrameId::body(), FrameId::world()};
  Pose T_cw{Rotation(), Vec3::Zero(), FrameId::camera(), FrameId::world()};
  Vec3 velocity = Vec3::Zero();
  Vec3 normal_c = Vec3::UnitZ();  ///< ground normal in the left camera
  double d = 0.0;                 ///< left camera to ground distance
};

struct GroundTruth {
  TrajectoryProfile profile;
  double ground_z = 0.0;
  std::vector<StateSample> states;  ///< IMU rate
  std::vector<TruthFrame> frames;   ///< camera rate
};

GroundTruth generate_trajectory(const TrajectoryProfile& profile, const CameraRig& rig);

struct RenderOptions {
  double noise_px = 0.5;
  /// Per-feature noise std drawn uniformly from [noise_min_px, noise_max_px].
  bool heteroscedastic = false;
  double noise_min_px = 0.2;
  double noise_max_px = 2.0;
};

/// Per-feature noise std used by render_tracks.
double feature_noise_px(const RenderOptions& options, int id, std::uint64_t seed);

/// Projects every visible scene point into both cameras of every frame.
std::vector<Keyframe> render_tracks(const std::vector<ScenePoint>& scene, const GroundTruth& truth,
                                    const CameraRig& rig, const RenderOptions& options,
                                    std::uint64_t seed);

struct ImuNoise {
  Vec3 gyro_bias = Vec3::Zero();
  Vec3 accel_bias = Vec3::Zero();
  double gyro_density = 0.0;   ///< rad/s/sqrt(Hz)
  double accel_density = 0.0;  ///< m/s^2/sqrt(Hz)

  static ImuNoise defaults();
};

std::vector<ImuSample> synthesize_imu(const GroundTruth& truth, const ImuNoise& noise,
                                      const Vec3& gravity, std::uint64_t seed);

struct SimulationConfig {
  SceneConfig scene;
  TrajectoryProfile profile;
  RenderOptions render;
  ImuNoise imu = ImuNoise::defaults();
  Vec3 gravity = default_gravity();
  CameraRig rig = default_rig();
  std::uint64_t seed = 1;
};

/// Named scene + profile with default noise. Oblique runs add an apron
/// dropout polygon that removes features from part of the view.
SimulationConfig simulation_preset(std::string_view scene, std::string_view profile,
                                   std::uint64_t seed);
/// Same configuration with every noise source switched off.
SimulationConfig noise_free(SimulationConfig config);

struct Dataset {
  SimulationConfig config;
  std::vector<ScenePoint> scene;
  GroundTruth truth;
  std::vector<ImuSample> imu;
  std::vector<Keyframe> frames;
};

Dataset simulate(const SimulationConfig& config);

}  // namespace planar_init
