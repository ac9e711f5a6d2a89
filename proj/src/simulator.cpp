#include "planar_init/simulator.hpp"

#include "planar_init/errors.hpp"

#include <cmath>
#include <random>

namespace planar_init {
namespace {

// Septic smoothstep: zero velocity, acceleration and jerk at both ends.
double smooth(double s) {
  if (s <= 0.0) return 0.0;
  if (s >= 1.0) return 1.0;
  const double s4 = s * s * s * s;
  return s4 * (35.0 + s * (-84.0 + s * (70.0 - 20.0 * s)));
}

double smooth_d1(double s) {
  if (s <= 0.0 || s >= 1.0) return 0.0;
  const double s3 = s * s * s;
  return s3 * (140.0 + s * (-420.0 + s * (420.0 - 140.0 * s)));
}

double smooth_d2(double s) {
  if (s <= 0.0 || s >= 1.0) return 0.0;
  const double s2 = s * s;
  return s2 * (420.0 + s * (-1680.0 + s * (2100.0 - 840.0 * s)));
}

// Uniform in [0, 1) from a counter, independent of any distribution object.
double hash_unit(std::uint64_t key) {
  return static_cast<double>(splitmix64(key) >> 11) * 0x1.0p-53;
}

}  // namespace

bool Polygon::contains(const Vec2& p) const {
  bool inside = false;
  const std::size_t n = vertices.size();
  for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
    const Vec2& a = vertices[i];
    const Vec2& b = vertices[j];
    if ((a.y() > p.y()) != (b.y() > p.y()) &&
        p.x() < (b.x() - a.x()) * (p.y() - a.y()) / (b.y() - a.y()) + a.x()) {
      inside = !inside;
    }
  }
  return inside;
}

SceneConfig scene_preset(std::string_view name) {
  SceneConfig c;
  c.preset = std::string(name);
  if (name == "helipad") {
    c.roughness = 0.0;
  } else if (name == "asphalt") {
    c.roughness = 0.01;
  } else if (name == "lawn") {
    c.roughness = 0.05;
  } else {
    throw Error(ErrorKind::kConfig, "unknown scene preset '" + std::string(name) + "'");
  }
  return c;
}

std::vector<ScenePoint> generate_scene(const SceneConfig& config) {
  if (config.roughness < 0.0 || config.feature_count < 0) {
    throw Error(ErrorKind::kConfig, "scene roughness and feature count must be non-negative");
  }
  std::mt19937_64 rng(config.seed);
  std::uniform_real_distribution<double> ux(-0.5 * config.extent_x, 0.5 * config.extent_x);
  std::uniform_real_distribution<double> uy(-0.5 * config.extent_y, 0.5 * config.extent_y);
  std::normal_distribution<double> nz(0.0, 1.0);
  std::vector<ScenePoint> points;
  int id = 0;
  for (int k = 0; k < config.feature_count; ++k) {
    const double x = ux(rng);
    const double y = uy(rng);
    const double z = config.roughness * nz(rng);
    bool dropped = false;
    for (const auto& poly : config.dropouts) dropped = dropped || poly.contains({x, y});
    if (!dropped) points.push_back({id++, Vec3(x, y, z)});
  }
  return points;
}

ProfileKind profile_from_string(std::string_view name) {
  if (name == "vertical") return ProfileKind::kVertical;
  if (name == "oblique") return ProfileKind::kOblique;
  if (name == "hover") return ProfileKind::kHover;
  throw Error(ErrorKind::kConfig, "unknown profile '" + std::string(name) + "'");
}

std::string_view to_string(ProfileKind kind) {
  switch (kind) {
    case ProfileKind::kVertical: return "vertical";
    case ProfileKind::kOblique: return "oblique";
    case ProfileKind::kHover: return "hover";
  }
  return "vertical";
}

double TrajectoryProfile::duration() const {
  if (kind == ProfileKind::kHover) return hover_s;
  return stationary_s + climb_height / climb_rate + hold_s;
}

void TrajectoryProfile::validate() const {
  if (!(camera_rate > 0.0 && imu_rate > 0.0)) throw Error(ErrorKind::kConfig, "rates must be positive");
  const double ratio = imu_rate / camera_rate;
  if (std::abs(ratio - std::round(ratio)) > 1e-9 || ratio < 1.0) {
    throw Error(ErrorKind::kConfig, "IMU rate must be an integer multiple of the camera rate");
  }
  if (kind != ProfileKind::kHover && !(climb_rate > 0.0 && climb_height > 0.0)) {
    throw Error(ErrorKind::kConfig, "climb rate and height must be positive");
  }
}

double ground_z(const TrajectoryProfile& profile) {
  return profile.kind == ProfileKind::kHover ? profile.hover_height : profile.rest_height;
}

TrajectoryPoint evaluate_trajectory(const TrajectoryProfile& profile, double t) {
  TrajectoryPoint tp;
  tp.t = t;
  if (profile.kind == ProfileKind::kHover) return tp;

  const double T = profile.climb_height / profile.climb_rate;
  const double s = (t - profile.stationary_s) / T;
  const double h = profile.climb_height;
  tp.p.z() = -h * smooth(s);
  tp.v.z() = -h * smooth_d1(s) / T;
  tp.a.z() = -h * smooth_d2(s) / (T * T);
  if (profile.kind == ProfileKind::kOblique) {
    tp.p.x() = profile.drift * smooth(s);
    tp.v.x() = profile.drift * smooth_d1(s) / T;
    tp.a.x() = profile.drift * smooth_d2(s) / (T * T);
    const double Tr = std::min(profile.tilt_ramp_s, T);
    const double sr = (t - profile.stationary_s) / Tr;
    const double pitch = profile.tilt * smooth(sr);
    const double pitch_rate = profile.tilt * smooth_d1(sr) / Tr;
    tp.R_bw = Rotation::from_euler_ned(0.0, pitch, 0.0);
    // ZYX Euler rates to body rates with roll = yaw = 0.
    tp.omega_b = Vec3(0.0, pitch_rate, 0.0);
  }
  return tp;
}

GroundTruth generate_trajectory(const TrajectoryProfile& profile, const CameraRig& rig) {
  profile.validate();
  GroundTruth truth;
  truth.profile = profile;
  truth.ground_z = ground_z(profile);
  const auto per_frame = static_cast<long>(std::llround(profile.imu_rate / profile.camera_rate));
  const auto n = static_cast<long>(std::floor(profile.duration() * profile.imu_rate + 1e-9)) + 1;
  for (long i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) / profile.imu_rate;
    const TrajectoryPoint tp = evaluate_trajectory(profile, t);
    StateSample s;
    s.t = t;
    s.T_bw = Pose{tp.R_bw, tp.p, FrameId::body(), FrameId::world()};
    s.velocity = tp.v;
    truth.states.push_back(s);
    if (i % per_frame == 0) {
      TruthFrame f;
      f.frame = static_cast<int>(i / per_frame);
      f.t = static_cast<double>(f.frame) / profile.camera_rate;
      f.T_bw = s.T_bw;
      f.T_cw = compose(s.T_bw, rig.T_cb);
      f.velocity = tp.v;
      f.normal_c = f.T_cw.rotation.inverse() * Vec3::UnitZ();
      f.d = truth.ground_z - f.T_cw.translation.z();
      truth.frames.push_back(f);
    }
  }
  return truth;
}

double feature_noise_px(const RenderOptions& options, int id, std::uint64_t seed) {
  if (!options.heteroscedastic) return options.noise_px;
  const double u = hash_unit(seed * 0x100000001b3ULL + static_cast<std::uint64_t>(id));
  return options.noise_min_px + u * (options.noise_max_px - options.noise_min_px);
}

std::vector<Keyframe> render_tracks(const std::vector<ScenePoint>& scene, const GroundTruth& truth,
                                    const CameraRig& rig, const RenderOptions& options,
                                    std::uint64_t seed) {
  std::vector<double> sigma(scene.size());
  for (std::size_t k = 0; k < scene.size(); ++k) sigma[k] = feature_noise_px(options, scene[k].id, seed);
  const Vec3 to_world(0.0, 0.0, truth.ground_z);
  const Vec3 baseline(rig.baseline, 0.0, 0.0);

  std::vector<Keyframe> frames;
  for (const TruthFrame& tf : truth.frames) {
    std::mt19937_64 rng(splitmix64(seed + 0x5bd1e995ULL * static_cast<std::uint64_t>(tf.frame + 1)));
    std::normal_distribution<double> noise(0.0, 1.0);
    const Rotation r_wc = tf.T_cw.rotation.inverse();
    Keyframe kf;
    kf.frame = tf.frame;
    kf.t = tf.t;
    for (std::size_t k = 0; k < scene.size(); ++k) {
      const Vec3 x_l = r_wc * (scene[k].p + to_world - tf.T_cw.translation);
      if (!(x_l.z() > 1e-6)) continue;
      const Vec3 x_r = x_l - baseline;
      const Vec2 u_l = project(rig, x_l);
      const Vec2 u_r = project(rig, x_r);
      if (!rig.in_image(u_l) || !rig.in_image(u_r)) continue;
      const double s = sigma[k];
      const Vec2 n_l(noise(rng), noise(rng));
      const Vec2 n_r(noise(rng), noise(rng));
      kf.features.push_back(make_observation(scene[k].id, u_l + s * n_l, u_r + s * n_r, rig));
    }
    frames.push_back(std::move(kf));
  }
  return frames;
}

ImuNoise ImuNoise::defaults() {
  ImuNoise n;
  n.gyro_bias = Vec3(0.001, -0.0008, 0.0005);
  n.accel_bias = Vec3(0.01, -0.008, 0.012);
  n.gyro_density = 0.005;
  n.accel_density = 0.05;
  return n;
}

std::vector<ImuSample> synthesize_imu(const GroundTruth& truth, const ImuNoise& noise,
                                      const Vec3& gravity, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> unit(0.0, 1.0);
  const double sg = noise.gyro_density * std::sqrt(truth.profile.imu_rate);
  const double sa = noise.accel_density * std::sqrt(truth.profile.imu_rate);
  std::vector<ImuSample> out;
  out.reserve(truth.states.size());
  for (const StateSample& s : truth.states) {
    const TrajectoryPoint tp = evaluate_trajectory(truth.profile, s.t);
    const Vec3 ng(unit(rng), unit(rng), unit(rng));
    const Vec3 na(unit(rng), unit(rng), unit(rng));
    ImuSample m;
    m.t = s.t;
    m.gyro = tp.omega_b + noise.gyro_bias + sg * ng;
    m.accel = tp.R_bw.inverse() * (tp.a - gravity) + noise.accel_bias + sa * na;
    out.push_back(m);
  }
  return out;
}

SimulationConfig simulation_preset(std::string_view scene, std::string_view profile,
                                   std::uint64_t seed) {
  SimulationConfig c;
  c.seed = seed;
  c.scene = scene_preset(scene);
  c.scene.seed = splitmix64(seed + 1);
  c.profile.kind = profile_from_string(profile);
  if (c.profile.kind == ProfileKind::kOblique) {
    // Smooth, texture-free apron covering one side of the take-off area.
    const double hx = 0.5 * c.scene.extent_x, hy = 0.5 * c.scene.extent_y;
    c.scene.dropouts.push_back({{{-hx, -hy}, {hx, -hy}, {hx, -0.3}, {-hx, -0.3}}});
  }
  return c;
}

SimulationConfig noise_free(SimulationConfig config) {
  config.render.noise_px = 0.0;
  config.render.heteroscedastic = false;
  config.imu = ImuNoise{};
  return config;
}

Dataset simulate(const SimulationConfig& config) {
  config.rig.validate();
  Dataset d;
  d.config = config;
  d.scene = generate_scene(config.scene);
  d.truth = generate_trajectory(config.profile, config.rig);
  d.frames = render_tracks(d.scene, d.truth, config.rig, config.render, splitmix64(config.seed + 2));
  d.imu = synthesize_imu(d.truth, config.imu, config.gravity, splitmix64(config.seed + 3));
  return d;
}

}  // namespace planar_init
