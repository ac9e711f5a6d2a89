#include "planar_init/imu.hpp"

#include "planar_init/errors.hpp"

#include <cmath>

namespace planar_init {
namespace {

void check_stream(std::span<const ImuSample> samples) {
  for (std::size_t k = 1; k < samples.size(); ++k) {
    if (!(samples[k].t > samples[k - 1].t)) {
      throw Error(ErrorKind::kStream, "IMU timestamps must be strictly increasing");
    }
  }
}

ImuSample lerp(const ImuSample& a, const ImuSample& b, double t) {
  const double u = (t - a.t) / (b.t - a.t);
  return {t, a.gyro + u * (b.gyro - a.gyro), a.accel + u * (b.accel - a.accel)};
}

}  // namespace

NavState NavState::at_rest(double t, const Rotation& attitude) {
  NavState s;
  s.t = t;
  s.pose = Pose{attitude, Vec3::Zero(), FrameId::body(), FrameId::world()};
  return s;
}

NavState propagate(const NavState& state, std::span<const ImuSample> samples, const Vec3& gravity) {
  if (samples.empty()) return state;
  check_stream(samples);
  if (std::abs(samples.front().t - state.t) > 1e-9) {
    throw Error(ErrorKind::kStream, "IMU stream does not start at the state time");
  }
  NavState out = state;
  Rotation r = state.pose.rotation;
  Vec3 p = state.pose.translation;
  Vec3 v = state.velocity;
  for (std::size_t k = 0; k + 1 < samples.size(); ++k) {
    const ImuSample& a = samples[k];
    const ImuSample& b = samples[k + 1];
    const double dt = b.t - a.t;
    const Vec3 w = 0.5 * (a.gyro + b.gyro) - state.gyro_bias;
    const Rotation r_next = r * Rotation::exp(w * dt);
    const Vec3 acc_a = r * (a.accel - state.accel_bias) + gravity;
    const Vec3 acc_b = r_next * (b.accel - state.accel_bias) + gravity;
    const Vec3 acc = 0.5 * (acc_a + acc_b);
    p += v * dt + 0.5 * acc * dt * dt;
    v += acc * dt;
    r = r_next;
  }
  out.t = samples.back().t;
  out.pose.rotation = r;
  out.pose.translation = p;
  out.velocity = v;
  return out;
}

Rotation integrate_body_rotation(std::span<const ImuSample> samples, const Vec3& gyro_bias) {
  if (samples.empty()) throw Error(ErrorKind::kStream, "empty IMU span");
  check_stream(samples);
  Rotation r;
  for (std::size_t k = 0; k + 1 < samples.size(); ++k) {
    const double dt = samples[k + 1].t - samples[k].t;
    r = r * Rotation::exp((0.5 * (samples[k].gyro + samples[k + 1].gyro) - gyro_bias) * dt);
  }
  return r;
}

Rotation integrate_camera_rotation(std::span<const ImuSample> samples, const Vec3& gyro_bias,
                                   const Pose& T_cb) {
  // delta is R_{b_k}^{b_{k-1}}; the camera rotation wants R_{c_{k-1}}^{c_k}.
  const Rotation delta = integrate_body_rotation(samples, gyro_bias);
  const Rotation& r_cb = T_cb.rotation;
  return r_cb.inverse() * delta.inverse() * r_cb;
}

PriorNormal propagate_normal(const PriorNormal& previous, const Rotation& R, double t) {
  return {(R * previous.n).normalized(), t};
}

std::vector<ImuSample> slice(std::span<const ImuSample> samples, double t0, double t1) {
  std::vector<ImuSample> out;
  if (samples.empty() || t1 < t0) return out;
  constexpr double kEps = 1e-9;
  if (t0 < samples.front().t - kEps || t1 > samples.back().t + kEps) {
    throw Error(ErrorKind::kStream, "requested span is outside the IMU stream");
  }
  for (std::size_t k = 0; k < samples.size(); ++k) {
    const ImuSample& s = samples[k];
    if (s.t < t0 - kEps) {
      if (k + 1 < samples.size() && samples[k + 1].t > t0 + kEps) out.push_back(lerp(s, samples[k + 1], t0));
      continue;
    }
    if (s.t > t1 + kEps) {
      if (k > 0 && samples[k - 1].t < t1 - kEps) out.push_back(lerp(samples[k - 1], s, t1));
      break;
    }
    out.push_back(s);
  }
  if (!out.empty()) {
    // Snap near-coincident endpoints so slices chain exactly.
    out.front().t = std::abs(out.front().t - t0) <= kEps ? t0 : out.front().t;
    out.back().t = std::abs(out.back().t - t1) <= kEps ? t1 : out.back().t;
  }
  return out;
}

StationaryWindow detect_stationary(std::span<const ImuSample> samples, double gravity_norm,
                                   const StationarityOptions& options) {
  StationaryWindow w;
  if (samples.size() < 2) return w;
  std::size_t begin = 0;
  Vec3 sum_acc = Vec3::Zero(), sum_gyro = Vec3::Zero();
  for (std::size_t end = 0; end < samples.size(); ++end) {
    sum_acc += samples[end].accel;
    sum_gyro += samples[end].gyro;
    while (samples[end].t - samples[begin].t > options.window_s + 1e-9) {
      sum_acc -= samples[begin].accel;
      sum_gyro -= samples[begin].gyro;
      ++begin;
    }
    if (samples[end].t - samples[begin].t < options.window_s - 1e-9) continue;
    const double count = static_cast<double>(end - begin + 1);
    const Vec3 mean_acc = sum_acc / count;
    const Vec3 mean_gyro = sum_gyro / count;
    if (std::abs(mean_acc.norm() - gravity_norm) <= options.accel_tolerance_g * gravity_norm &&
        mean_gyro.norm() < options.gyro_threshold) {
      w.found = true;
      w.t_begin = samples[begin].t;
      w.t_end = samples[end].t;
      w.mean_accel = mean_acc;
      w.mean_gyro = mean_gyro;
      return w;
    }
  }
  return w;
}

Rotation gravity_aligned_attitude(const Vec3& mean_accel) {
  // At rest the specific force is -R_w^b g, i.e. it points "up" in the body frame.
  const Vec3 up_body = mean_accel.normalized();
  const double roll = std::atan2(-up_body.y(), -up_body.z());
  const double pitch = std::atan2(up_body.x(), std::sqrt(up_body.y() * up_body.y() + up_body.z() * up_body.z()));
  return Rotation::from_euler_ned(roll, pitch, 0.0);
}

}  // namespace planar_init
