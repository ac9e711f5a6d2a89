#pragma once

#include "planar_init/geometry.hpp"

#include <array>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace planar_init {

/// Timestamped body state, used for both estimates and ground truth.
struct StateSample {
  double t = 0.0;
  Pose T_bw{Rotation(), Vec3::Zero(), FrameId::body(), FrameId::world()};
  Vec3 velocity = Vec3::Zero();
};

/// Linear-interpolated percentile, q in [0, 100]. Returns 0 for empty input.
double percentile(std::vector<double> values, double q);

struct FiveNumber {
  double min = 0.0;
  double q1 = 0.0;
  double median = 0.0;
  double q3 = 0.0;
  double max = 0.0;
};
FiveNumber five_number(std::span<const double> values);

enum class Alignment { kNone, kFirst };
Alignment alignment_from_string(std::string_view s);
std::string_view to_string(Alignment a);

/// Per-state error row: translation, velocity, NED Euler angles (wrapped).
struct ErrorRow {
  double t = 0.0;
  std::array<double, 9> err{};  ///< x y z vx vy vz roll pitch yaw
};

inline constexpr std::array<const char*, 9> kErrorNames = {
    "err_x", "err_y", "err_z", "err_vx", "err_vy", "err_vz", "err_roll", "err_pitch", "err_yaw"};

struct MetricsReport {
  static constexpr int kSchemaVersion = 1;
  std::string status = "unknown";
  int samples = 0;
  Vec3 translation_rmse = Vec3::Zero();
  Vec3 velocity_rmse = Vec3::Zero();
  Vec3 euler_rmse = Vec3::Zero();        ///< roll, pitch, yaw
  Vec3 max_abs_translation = Vec3::Zero();
  Vec3 max_abs_euler = Vec3::Zero();
  double indicator_p50 = 0.0;
  double indicator_p95 = 0.0;
  double indicator_max = 0.0;
  std::array<FiveNumber, 9> boxplots{};
  std::map<std::string, double> timings_ms;
  std::vector<ErrorRow> rows;
};

/// Associates every estimate with the nearest truth sample within `tolerance`
/// seconds and computes errors. With kFirst, the translation offset of the
/// first associated pair is removed from every estimate. Throws kAlignment
/// when nothing associates.
MetricsReport evaluate_states(std::span<const StateSample> estimates,
                              std::span<const StateSample> truth, double tolerance,
                              Alignment alignment = Alignment::kNone);

/// Wraps an angle to (-pi, pi].
double wrap_angle(double a);

}  // namespace planar_init
