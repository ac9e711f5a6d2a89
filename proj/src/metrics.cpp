#include "planar_init/metrics.hpp"

#include "planar_init/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace planar_init {

double percentile(std::vector<double> values, double q) {
  if (values.empty()) return 0.0;
  std::sort(values.begin(), values.end());
  const double pos = std::clamp(q, 0.0, 100.0) / 100.0 * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return values[lo] + frac * (values[hi] - values[lo]);
}

FiveNumber five_number(std::span<const double> values) {
  std::vector<double> v(values.begin(), values.end());
  return {percentile(v, 0), percentile(v, 25), percentile(v, 50), percentile(v, 75), percentile(v, 100)};
}

Alignment alignment_from_string(std::string_view s) {
  if (s == "none") return Alignment::kNone;
  if (s == "first") return Alignment::kFirst;
  throw Error(ErrorKind::kConfig, "alignment must be none or first");
}

std::string_view to_string(Alignment a) { return a == Alignment::kNone ? "none" : "first"; }

double wrap_angle(double a) {
  constexpr double kTwoPi = 2.0 * std::numbers::pi;
  a = std::fmod(a, kTwoPi);
  if (a <= -std::numbers::pi) a += kTwoPi;
  if (a > std::numbers::pi) a -= kTwoPi;
  return a;
}

MetricsReport evaluate_states(std::span<const StateSample> estimates,
                              std::span<const StateSample> truth, double tolerance,
                              Alignment alignment) {
  MetricsReport report;
  if (truth.empty() || estimates.empty()) throw Error(ErrorKind::kAlignment, "empty series");

  std::vector<std::pair<const StateSample*, const StateSample*>> matched;
  for (const auto& e : estimates) {
    auto it = std::lower_bound(truth.begin(), truth.end(), e.t,
                               [](const StateSample& s, double t) { return s.t < t; });
    const StateSample* best = nullptr;
    double best_dt = tolerance;
    for (auto cand : {it, it == truth.begin() ? it : std::prev(it)}) {
      if (cand == truth.end()) continue;
      const double dt = std::abs(cand->t - e.t);
      if (dt <= best_dt) {
        best_dt = dt;
        best = &*cand;
      }
    }
    if (best) matched.emplace_back(&e, best);
  }
  if (matched.empty()) throw Error(ErrorKind::kAlignment, "no estimate within tolerance of the truth");

  const Vec3 offset = alignment == Alignment::kFirst
                          ? Vec3(matched.front().first->T_bw.translation - matched.front().second->T_bw.translation)
                          : Vec3::Zero();
  std::array<std::vector<double>, 9> columns;
  Vec3 sq_t = Vec3::Zero(), sq_v = Vec3::Zero(), sq_e = Vec3::Zero();
  for (const auto& [e, g] : matched) {
    ErrorRow row;
    row.t = e->t;
    const Vec3 dt = e->T_bw.translation - offset - g->T_bw.translation;
    const Vec3 dv = e->velocity - g->velocity;
    const EulerNed ee = to_euler_ned(e->T_bw.rotation);
    const EulerNed eg = to_euler_ned(g->T_bw.rotation);
    const Vec3 de(wrap_angle(ee.roll - eg.roll), wrap_angle(ee.pitch - eg.pitch), wrap_angle(ee.yaw - eg.yaw));
    for (int k = 0; k < 3; ++k) {
      row.err[k] = dt(k);
      row.err[3 + k] = dv(k);
      row.err[6 + k] = de(k);
      report.max_abs_translation(k) = std::max(report.max_abs_translation(k), std::abs(dt(k)));
      report.max_abs_euler(k) = std::max(report.max_abs_euler(k), std::abs(de(k)));
    }
    sq_t += dt.cwiseAbs2();
    sq_v += dv.cwiseAbs2();
    sq_e += de.cwiseAbs2();
    for (int k = 0; k < 9; ++k) columns[k].push_back(row.err[k]);
    report.rows.push_back(row);
  }
  const double n = static_cast<double>(matched.size());
  report.samples = static_cast<int>(matched.size());
  report.translation_rmse = (sq_t / n).cwiseSqrt();
  report.velocity_rmse = (sq_v / n).cwiseSqrt();
  report.euler_rmse = (sq_e / n).cwiseSqrt();
  for (int k = 0; k < 9; ++k) report.boxplots[k] = five_number(columns[k]);
  return report;
}

}  // namespace planar_init
