#include "planar_init/pipeline.hpp"

#include "planar_init/errors.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <chrono>

namespace planar_init {
namespace {

class StageTimer {
 public:
  StageTimer(std::map<std::string, double>& sink, std::string name)
      : sink_(sink), name_(std::move(name)), start_(std::chrono::steady_clock::now()) {}
  ~StageTimer() {
    const auto dt = std::chrono::steady_clock::now() - start_;
    sink_[name_] += std::chrono::duration<double, std::milli>(dt).count();
  }

 private:
  std::map<std::string, double>& sink_;
  std::string name_;
  std::chrono::steady_clock::time_point start_;
};

void fail(PipelineOutput& out, const std::string& stage, ErrorKind kind, const std::string& msg) {
  out.result.status = InitStatus::kFailed;
  out.result.diagnostics.failed_stage = stage;
  out.result.diagnostics.error_kind = std::string(to_string(kind));
  out.result.diagnostics.message = msg;
}

}  // namespace

std::string_view to_string(Phase phase) {
  switch (phase) {
    case Phase::kWaitStationary: return "wait-stationary";
    case Phase::kImuPropagation: return "imu-propagation";
    case Phase::kGatherWindow: return "gather-window";
    case Phase::kInitialize: return "initialize";
    case Phase::kDone: return "done";
  }
  return "done";
}

std::optional<double> stereo_altitude(const Keyframe& frame, const CameraRig& rig, const Vec3& n_c,
                                      double min_disparity_px, int min_points) {
  std::vector<double> h;
  for (const auto& f : frame.features) {
    if (!(f.left_px.x() - f.right_px.x() > 0.0)) continue;
    const StereoPoint sp = triangulate_stereo(f.left_px, f.right_px, rig, min_disparity_px);
    if (sp.reliable) h.push_back(n_c.dot(sp.p_c));
  }
  if (h.empty() || static_cast<int>(h.size()) < min_points) return std::nullopt;
  auto mid = h.begin() + static_cast<long>(h.size() / 2);
  std::nth_element(h.begin(), mid, h.end());
  return *mid;
}

PipelineOutput run_pipeline(std::span<const Keyframe> frames, std::span<const ImuSample> imu,
                            const CameraRig& rig, const PipelineConfig& config, std::uint64_t seed) {
  PipelineOutput out;
  try {
    config.validate();
    rig.validate();
  } catch (const Error& e) {
    fail(out, "input", e.kind(), e.what());
    return out;
  }

  out.phases.push_back(Phase::kWaitStationary);
  StationaryWindow rest;
  {
    StageTimer timer(out.timings_ms, "stationarity");
    rest = detect_stationary(imu, config.gravity.norm(), config.stationarity);
  }
  if (!rest.found) {
    fail(out, "stationarity", ErrorKind::kInsufficientData, "no stationary window at the start");
    out.phases.push_back(Phase::kDone);
    return out;
  }
  out.rest_time = rest.t_begin;
  spdlog::debug("at rest from {:.3f} s", rest.t_begin);

  out.phases.push_back(Phase::kImuPropagation);
  std::vector<NavState> states;
  std::vector<PriorNormal> normals;
  std::vector<std::size_t> frame_index;
  try {
    StageTimer timer(out.timings_ms, "propagation");
    NavState state = NavState::at_rest(rest.t_begin, gravity_aligned_attitude(rest.mean_accel));
    state.gyro_bias = config.gyro_bias;
    state.accel_bias = config.accel_bias;
    PriorNormal normal{Vec3::UnitZ(), rest.t_begin};
    for (std::size_t k = 0; k < frames.size(); ++k) {
      if (frames[k].t < rest.t_begin) continue;
      if (frames[k].t > state.t) {
        const std::vector<ImuSample> seg = slice(imu, state.t, frames[k].t);
        normal = propagate_normal(
            normal, integrate_camera_rotation(seg, config.gyro_bias, rig.T_cb), frames[k].t);
        state = propagate(state, seg, config.gravity);
      }
      states.push_back(state);
      normals.push_back(normal);
      frame_index.push_back(k);
      out.imu_track.push_back({state.t, state.pose, state.velocity});
      // The IMU-only climb random-walks; once the ground is densely seen in
      // stereo its altitude is the better height.
      double height = -state.pose.translation.z();
      if (config.stereo_height_gate) {
        const auto h = stereo_altitude(frames[k], rig, normal.n, config.min_disparity_px,
                                       config.min_features);
        if (h) height = *h;
      }
      if (out.gate_frame < 0 && height >= config.preset_height_m) {
        out.gate_frame = frames[k].frame;
        out.gate_time = frames[k].t;
        break;
      }
    }
  } catch (const Error& e) {
    fail(out, "propagation", e.kind(), e.what());
    out.phases.push_back(Phase::kDone);
    return out;
  }

  auto imu_only_tail = [&](std::size_t from) {
    out.result.keyframes.clear();
    for (std::size_t k = from; k < states.size(); ++k) {
      KeyframeState ks;
      ks.frame = frames[frame_index[k]].frame;
      ks.t = states[k].t;
      ks.T_bw = states[k].pose;
      ks.velocity = states[k].velocity;
      out.result.keyframes.push_back(ks);
    }
  };

  const auto window = static_cast<std::size_t>(config.window_size);
  if (out.gate_frame < 0) {
    out.result.status = InitStatus::kGateNotReached;
    out.result.diagnostics.message = "the pre-set height was never reached";
    imu_only_tail(states.size() > window ? states.size() - window : 0);
    out.phases.push_back(Phase::kDone);
    return out;
  }

  out.phases.push_back(Phase::kGatherWindow);
  const std::size_t gate = frame_index.back();
  if (gate + window > frames.size()) {
    out.result.status = InitStatus::kGateNotReached;
    out.result.diagnostics.message = "recording ends before the window fills";
    imu_only_tail(states.size() - 1);
    out.phases.push_back(Phase::kDone);
    return out;
  }
  KeyframeWindow kw;
  kw.capacity = config.window_size;
  kw.keyframes.assign(frames.begin() + static_cast<long>(gate),
                      frames.begin() + static_cast<long>(gate + window));

  out.phases.push_back(Phase::kInitialize);
  {
    StageTimer timer(out.timings_ms, "initialization");
    const WindowAnchor anchor{states.back(), normals.back()};
    out.result = run_initialization(kw, imu, anchor, rig, config, seed);
  }
  spdlog::debug("initialization finished: {}", to_string(out.result.status));
  out.phases.push_back(Phase::kDone);
  return out;
}

}  // namespace planar_init
