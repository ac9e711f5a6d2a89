#include "planar_init/config.hpp"

#include "planar_init/errors.hpp"

#include "json.hpp"

#include <fstream>
#include <set>
#include <sstream>

namespace planar_init {

using nlohmann::json;

namespace {

Vec3 vec3_from(const json& j, const char* key) {
  if (!j.is_array() || j.size() != 3) throw Error(ErrorKind::kConfig, std::string(key) + " must be a 3-array");
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

json to_array(const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); }

template <typename T>
void read(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

}  // namespace

void PipelineConfig::validate() const {
  auto fail = [](const std::string& what) { throw Error(ErrorKind::kConfig, what); };
  if (!(preset_height_m > 0.0 && preset_height_m < 3.0)) fail("preset_height_m must be in (0, 3)");
  if (window_size < 2) fail("window_size must be at least 2");
  if (min_features < 4) fail("min_features must be at least 4");
  if (!(min_disparity_px >= 0.0)) fail("min_disparity_px must be non-negative");
  if (!(ransac.threshold > 0.0)) fail("ransac_threshold must be positive");
  if (!(ransac.confidence > 0.0 && ransac.confidence < 1.0)) fail("ransac_confidence must be in (0, 1)");
  if (ransac.max_iterations < 1) fail("ransac_max_iters must be positive");
  if (!(pnp.threshold > 0.0)) fail("pnp_threshold must be positive");
  if (gn.max_iterations < 1) fail("gn_max_iters must be positive");
  if (!(fixed_deviation_px > 0.0)) fail("fixed_deviation_px must be positive");
  if (!(deviation_floor_px > 0.0)) fail("deviation_floor_px must be positive");
  if (!(min_parallax >= 0.0)) fail("min_parallax must be non-negative");
}

PipelineConfig pipeline_config_from_json(const std::string& text) {
  static const std::set<std::string> kKeys = {
      "preset_height_m", "window_size", "min_features", "min_disparity_px", "gn_max_iters",
      "ransac_threshold", "ransac_confidence", "ransac_max_iters", "pnp_threshold",
      "pnp_max_iters", "deviation", "fixed_deviation_px", "deviation_floor_px", "min_parallax",
      "plane_tilt_correction", "stereo_height_gate", "gravity", "gyro_bias", "accel_bias",
      "stationary_window_s", "stationary_accel_tolerance_g", "stationary_gyro_threshold"};
  PipelineConfig c;
  try {
    const json j = json::parse(text);
    if (!j.is_object()) throw Error(ErrorKind::kConfig, "config must be a JSON object");
    for (const auto& [key, _] : j.items()) {
      if (!kKeys.count(key)) throw Error(ErrorKind::kConfig, "unknown config key '" + key + "'");
    }
    read(j, "preset_height_m", c.preset_height_m);
    read(j, "window_size", c.window_size);
    read(j, "min_features", c.min_features);
    read(j, "min_disparity_px", c.min_disparity_px);
    read(j, "gn_max_iters", c.gn.max_iterations);
    read(j, "ransac_threshold", c.ransac.threshold);
    read(j, "ransac_confidence", c.ransac.confidence);
    read(j, "ransac_max_iters", c.ransac.max_iterations);
    read(j, "pnp_threshold", c.pnp.threshold);
    read(j, "pnp_max_iters", c.pnp.max_iterations);
    if (j.contains("deviation")) c.deviation = deviation_mode_from_string(j["deviation"].get<std::string>());
    read(j, "fixed_deviation_px", c.fixed_deviation_px);
    read(j, "deviation_floor_px", c.deviation_floor_px);
    read(j, "min_parallax", c.min_parallax);
    read(j, "plane_tilt_correction", c.plane_tilt_correction);
    read(j, "stereo_height_gate", c.stereo_height_gate);
    if (j.contains("gravity")) c.gravity = vec3_from(j["gravity"], "gravity");
    if (j.contains("gyro_bias")) c.gyro_bias = vec3_from(j["gyro_bias"], "gyro_bias");
    if (j.contains("accel_bias")) c.accel_bias = vec3_from(j["accel_bias"], "accel_bias");
    read(j, "stationary_window_s", c.stationarity.window_s);
    read(j, "stationary_accel_tolerance_g", c.stationarity.accel_tolerance_g);
    read(j, "stationary_gyro_threshold", c.stationarity.gyro_threshold);
  } catch (const json::exception& e) {
    throw Error(ErrorKind::kConfig, e.what());
  }
  c.validate();
  return c;
}

PipelineConfig load_pipeline_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::kIo, "cannot open config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return pipeline_config_from_json(ss.str());
}

std::string pipeline_config_to_json(const PipelineConfig& c) {
  json j;
  j["preset_height_m"] = c.preset_height_m;
  j["window_size"] = c.window_size;
  j["min_features"] = c.min_features;
  j["min_disparity_px"] = c.min_disparity_px;
  j["gn_max_iters"] = c.gn.max_iterations;
  j["ransac_threshold"] = c.ransac.threshold;
  j["ransac_confidence"] = c.ransac.confidence;
  j["ransac_max_iters"] = c.ransac.max_iterations;
  j["pnp_threshold"] = c.pnp.threshold;
  j["pnp_max_iters"] = c.pnp.max_iterations;
  j["deviation"] = std::string(to_string(c.deviation));
  j["fixed_deviation_px"] = c.fixed_deviation_px;
  j["deviation_floor_px"] = c.deviation_floor_px;
  j["min_parallax"] = c.min_parallax;
  j["plane_tilt_correction"] = c.plane_tilt_correction;
  j["stereo_height_gate"] = c.stereo_height_gate;
  j["gravity"] = to_array(c.gravity);
  j["gyro_bias"] = to_array(c.gyro_bias);
  j["accel_bias"] = to_array(c.accel_bias);
  j["stationary_window_s"] = c.stationarity.window_s;
  j["stationary_accel_tolerance_g"] = c.stationarity.accel_tolerance_g;
  j["stationary_gyro_threshold"] = c.stationarity.gyro_threshold;
  return j.dump(2);
}

CameraRig rig_from_json(const std::string& text) {
  CameraRig rig;
  try {
    const json j = json::parse(text);
    rig.f = j.at("f").get<double>();
    rig.cx = j.at("cx").get<double>();
    rig.cy = j.at("cy").get<double>();
    rig.baseline = j.at("baseline").get<double>();
    rig.width = j.at("width").get<int>();
    rig.height = j.at("height").get<int>();
    const json& t = j.at("T_cb");
    const json& q = t.at("q");
    if (!q.is_array() || q.size() != 4) throw Error(ErrorKind::kConfig, "T_cb.q must be [w,x,y,z]");
    rig.T_cb.rotation = Rotation(Eigen::Quaterniond(q[0].get<double>(), q[1].get<double>(),
                                                    q[2].get<double>(), q[3].get<double>()));
    rig.T_cb.translation = vec3_from(t.at("t"), "T_cb.t");
    rig.T_cb.of = FrameId::camera();
    rig.T_cb.in = FrameId::body();
  } catch (const json::exception& e) {
    throw Error(ErrorKind::kConfig, std::string("rig: ") + e.what());
  }
  rig.validate();
  return rig;
}

std::string rig_to_json(const CameraRig& rig) {
  const auto& q = rig.T_cb.rotation.quaternion();
  json j;
  j["f"] = rig.f;
  j["cx"] = rig.cx;
  j["cy"] = rig.cy;
  j["baseline"] = rig.baseline;
  j["width"] = rig.width;
  j["height"] = rig.height;
  j["T_cb"] = {{"q", json::array({q.w(), q.x(), q.y(), q.z()})}, {"t", to_array(rig.T_cb.translation)}};
  return j.dump(2);
}

std::string_view to_string(DeviationMode mode) {
  return mode == DeviationMode::kFixed ? "fixed" : "dynamic";
}

DeviationMode deviation_mode_from_string(std::string_view s) {
  if (s == "fixed") return DeviationMode::kFixed;
  if (s == "dynamic") return DeviationMode::kDynamic;
  throw Error(ErrorKind::kConfig, "deviation must be fixed or dynamic");
}

}  // namespace planar_init
