#include "planar_init/harness.hpp"

#include "planar_init/dataset_io.hpp"
#include "planar_init/errors.hpp"

#include "json.hpp"
#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include <atomic>
#include <cmath>
#include <iostream>
#include <thread>

namespace planar_init {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

json vec(const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); }

json quat(const Rotation& r) {
  const auto& q = r.quaternion();
  return json::array({q.w(), q.x(), q.y(), q.z()});
}

json number(double x) { return std::isfinite(x) ? json(x) : json(nullptr); }

Vec3 vec_from(const json& j) { return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()}; }

json xyz(const Vec3& v) { return {{"x", v.x()}, {"y", v.y()}, {"z", v.z()}}; }

int exit_for(const Error& e) {
  switch (e.kind()) {
    case ErrorKind::kIo: return kExitIo;
    case ErrorKind::kConfig: return kExitUsage;
    default: return kExitPipeline;
  }
}

PipelineConfig resolve_config(const std::optional<fs::path>& path, const std::optional<std::string>& deviation,
                              const std::optional<double>& fixed_px) {
  PipelineConfig config = path ? load_pipeline_config(*path) : PipelineConfig{};
  if (deviation) config.deviation = deviation_mode_from_string(*deviation);
  if (fixed_px) config.fixed_deviation_px = *fixed_px;
  config.validate();
  return config;
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(ErrorKind::kIo, "cannot create " + dir.string() + ": " + ec.message());
}

std::vector<StateSample> estimates_of(const InitializationResult& r) {
  std::vector<StateSample> out;
  for (const auto& k : r.keyframes) out.push_back({k.t, k.T_bw, k.velocity});
  return out;
}

double half_camera_period(const GroundTruth& truth) { return 0.5 / truth.profile.camera_rate + 1e-9; }

}  // namespace

std::uint64_t trial_seed(std::uint64_t master, std::uint64_t index) {
  return splitmix64(master ^ splitmix64(index));
}

std::string result_to_json(const PipelineOutput& output, const PipelineConfig& config,
                           std::uint64_t seed) {
  const InitializationResult& r = output.result;
  const Diagnostics& d = r.diagnostics;
  json j;
  j["schema_version"] = MetricsReport::kSchemaVersion;
  j["status"] = std::string(to_string(r.status));
  j["seed"] = seed;
  j["deviation"] = std::string(to_string(config.deviation));
  j["gate_frame"] = output.gate_frame;
  j["gate_time"] = output.gate_time;
  j["phases"] = json::array();
  for (Phase p : output.phases) j["phases"].push_back(std::string(to_string(p)));
  j["scale"] = r.scale;
  j["normal_cam0"] = vec(r.normal_cam0);
  j["selected"] = {{"q", quat(r.selected.R)}, {"t_bar", vec(r.selected.t_bar)}, {"n", vec(r.selected.n)},
                   {"normal_determined", r.selected.normal_determined}};
  j["keyframes"] = json::array();
  for (const auto& k : r.keyframes) {
    j["keyframes"].push_back({{"frame", k.frame}, {"t", k.t}, {"q", quat(k.T_bw.rotation)},
                              {"p", vec(k.T_bw.translation)}, {"v", vec(k.velocity)}});
  }
  json diag;
  diag["selection_margin"] = number(d.selection_margin);
  diag["pnp_inliers"] = d.pnp_inliers;
  diag["gn_iterations"] = d.gn_iterations;
  diag["gn_final_cost"] = d.gn_final_cost;
  diag["gn_converged"] = d.gn_converged;
  diag["indicator"] = {{"p50", d.indicator_p50}, {"p95", d.indicator_p95}, {"max", d.indicator_max}};
  diag["indicators"] = d.indicators;
  diag["scale_normal_residual"] = d.scale_normal_residual;
  diag["failed_stage"] = d.failed_stage;
  diag["error_kind"] = d.error_kind;
  diag["message"] = d.message;
  diag["pairs"] = json::array();
  for (const auto& p : d.pairs) {
    diag["pairs"].push_back({{"keyframe", p.keyframe}, {"correspondences", p.correspondences},
                             {"homography_inliers", p.homography_inliers}, {"pnp_pairs", p.pnp_pairs},
                             {"pnp_inliers", p.pnp_inliers}, {"t_bar_norm", p.t_bar_norm},
                             {"t_bar_cam0", vec(p.t_bar_cam0)}, {"t_hat", vec(p.t_hat)},
                             {"used_for_scale", p.used_for_scale}});
  }
  diag["selections"] = json::array();
  for (const auto& s : d.selections) {
    json cands = json::array();
    for (const auto& c : s.candidates) cands.push_back(vec(c));
    diag["selections"].push_back({{"keyframe", s.keyframe}, {"prior", vec(s.prior)}, {"candidates", cands},
                                  {"selected", s.selected}, {"margin", number(s.margin)}});
  }
  diag["interval_velocities"] = json::array();
  for (const auto& v : d.interval_velocities) diag["interval_velocities"].push_back(vec(v));
  j["diagnostics"] = diag;
  return j.dump(2);
}

LoadedResult result_from_json(const std::string& text) {
  LoadedResult out;
  try {
    const json j = json::parse(text);
    out.status = j.at("status").get<std::string>();
    out.deviation = j.value("deviation", std::string("dynamic"));
    for (const auto& k : j.at("keyframes")) {
      const auto& q = k.at("q");
      StateSample s;
      s.t = k.at("t").get<double>();
      s.T_bw = Pose{Rotation(Eigen::Quaterniond(q[0].get<double>(), q[1].get<double>(), q[2].get<double>(),
                                                q[3].get<double>())),
                    vec_from(k.at("p")), FrameId::body(), FrameId::world()};
      s.velocity = vec_from(k.at("v"));
      out.keyframes.push_back(s);
    }
    if (j.contains("diagnostics")) {
      out.indicators = j["diagnostics"].value("indicators", std::vector<double>{});
    }
  } catch (const json::exception& e) {
    throw Error(ErrorKind::kIo, std::string("result JSON: ") + e.what());
  }
  return out;
}

std::string metrics_to_json(const MetricsReport& r, Alignment alignment) {
  json j;
  j["schema_version"] = MetricsReport::kSchemaVersion;
  j["status"] = r.status;
  j["alignment"] = std::string(to_string(alignment));
  j["samples"] = r.samples;
  j["translation_rmse"] = xyz(r.translation_rmse);
  j["velocity_rmse"] = xyz(r.velocity_rmse);
  j["euler_rmse"] = {{"roll", r.euler_rmse.x()}, {"pitch", r.euler_rmse.y()}, {"yaw", r.euler_rmse.z()}};
  j["max_abs_translation"] = xyz(r.max_abs_translation);
  j["max_abs_euler"] = {{"roll", r.max_abs_euler.x()}, {"pitch", r.max_abs_euler.y()}, {"yaw", r.max_abs_euler.z()}};
  j["indicator"] = {{"p50", r.indicator_p50}, {"p95", r.indicator_p95}, {"max", r.indicator_max}};
  json box;
  for (std::size_t k = 0; k < kErrorNames.size(); ++k) {
    const FiveNumber& f = r.boxplots[k];
    box[kErrorNames[k]] = {{"min", f.min}, {"q1", f.q1}, {"median", f.median}, {"q3", f.q3}, {"max", f.max}};
  }
  j["boxplots"] = box;
  j["timings_ms"] = r.timings_ms;
  return j.dump(2);
}

std::string errors_to_csv(const MetricsReport& r) {
  fmt::memory_buffer buf;
  fmt::format_to(std::back_inserter(buf), "t");
  for (const char* name : kErrorNames) fmt::format_to(std::back_inserter(buf), ",{}", name);
  fmt::format_to(std::back_inserter(buf), "\n");
  for (const auto& row : r.rows) {
    fmt::format_to(std::back_inserter(buf), "{:.17g}", row.t);
    for (double e : row.err) fmt::format_to(std::back_inserter(buf), ",{:.17g}", e);
    fmt::format_to(std::back_inserter(buf), "\n");
  }
  return fmt::to_string(buf);
}

bool selection_matches_truth(const InitializationResult& result, const GroundTruth& truth, bool* checked) {
  bool ok = true;
  bool any = false;
  for (const auto& s : result.diagnostics.selections) {
    const std::size_t k = static_cast<std::size_t>(s.keyframe);
    if (k >= result.keyframes.size() || s.candidates.size() < 2) continue;
    const int frame = result.keyframes[k].frame;
    const TruthFrame* tf = nullptr;
    for (const auto& f : truth.frames) {
      if (f.frame == frame) tf = &f;
    }
    if (!tf) continue;
    any = true;
    std::size_t nearest = 0;
    for (std::size_t c = 1; c < s.candidates.size(); ++c) {
      if ((s.candidates[c] - tf->normal_c).norm() < (s.candidates[nearest] - tf->normal_c).norm()) nearest = c;
    }
    // Coincident candidates (motion along the normal) are all the truth.
    const Vec3& chosen = s.candidates[static_cast<std::size_t>(s.selected)];
    ok = ok && (static_cast<int>(nearest) == s.selected || (chosen - tf->normal_c).norm() <= 1e-6);
  }
  if (checked) *checked = any;
  return ok && any;
}

TrialOutcome run_trial(const SimulationConfig& sim, const PipelineConfig& config) {
  TrialOutcome t;
  t.scene = sim.scene.preset;
  t.profile = std::string(to_string(sim.profile.kind));
  t.seed = sim.seed;
  const Dataset d = simulate(sim);
  const PipelineOutput out = run_pipeline(d.frames, d.imu, sim.rig, config, sim.seed);
  const InitializationResult& r = out.result;
  t.status = std::string(to_string(r.status));
  if (r.status != InitStatus::kInitialized || r.keyframes.empty()) return t;
  t.selection_ok = selection_matches_truth(r, d.truth, &t.selection_checked);
  t.scale = r.scale;
  for (const auto& f : d.truth.frames) {
    if (f.frame == r.keyframes.front().frame) t.scale_true = f.d;
  }
  t.scale_rel_err = t.scale_true > 0.0 ? std::abs(t.scale - t.scale_true) / t.scale_true : 0.0;
  const auto est = estimates_of(r);
  const MetricsReport m = evaluate_states(est, d.truth.states, half_camera_period(d.truth), Alignment::kFirst);
  t.translation_rmse = m.translation_rmse;
  t.velocity_rmse = m.velocity_rmse;
  t.euler_rmse = m.euler_rmse;
  t.max_abs_translation = m.max_abs_translation;
  return t;
}

int cmd_generate(const GenerateOptions& o) {
  try {
    SimulationConfig sim = simulation_preset(o.scene, o.profile, o.seed);
    if (o.noise_free) sim = noise_free(sim);
    if (o.noise_px) sim.render.noise_px = *o.noise_px;
    if (o.heteroscedastic) sim.render.heteroscedastic = true;
    if (o.features) sim.scene.feature_count = *o.features;
    if (o.out.empty()) throw Error(ErrorKind::kConfig, "--out is required");
    const Dataset d = simulate(sim);
    write_dataset(o.out, d);
    std::cout << dataset_digest(o.out) << "\n";
    spdlog::info("wrote {} frames, {} IMU samples to {}", d.frames.size(), d.imu.size(), o.out.string());
    return kExitOk;
  } catch (const Error& e) {
    std::cerr << "generate: " << e.what() << "\n";
    return exit_for(e);
  }
}

int cmd_init(const InitOptions& o) {
  try {
    const PipelineConfig config = resolve_config(o.config, o.deviation, o.fixed_deviation_px);
    const Alignment align = alignment_from_string(o.align);
    if (o.out.empty()) throw Error(ErrorKind::kConfig, "--out is required");
    const Dataset d = read_dataset(o.dataset);
    const PipelineOutput out = run_pipeline(d.frames, d.imu, d.config.rig, config, o.seed);
    ensure_dir(o.out);
    write_text(o.out / "result.json", result_to_json(out, config, o.seed) + "\n");

    MetricsReport m;
    const auto est = estimates_of(out.result);
    if (!est.empty() && !d.truth.states.empty()) {
      try {
        m = evaluate_states(est, d.truth.states, half_camera_period(d.truth), align);
      } catch (const Error& e) {
        spdlog::warn("metrics skipped: {}", e.what());
      }
    }
    m.status = std::string(to_string(out.result.status));
    m.indicator_p50 = out.result.diagnostics.indicator_p50;
    m.indicator_p95 = out.result.diagnostics.indicator_p95;
    m.indicator_max = out.result.diagnostics.indicator_max;
    m.timings_ms = out.timings_ms;
    write_text(o.out / "metrics.json", metrics_to_json(m, align) + "\n");
    write_text(o.out / "errors.csv", errors_to_csv(m));
    std::cout << fmt::format("status {} scale {:.6f} translation_rmse [{:.6f} {:.6f} {:.6f}]\n", m.status,
                             out.result.scale, m.translation_rmse.x(), m.translation_rmse.y(),
                             m.translation_rmse.z());
    if (out.result.status != InitStatus::kInitialized) {
      std::cerr << "init: " << m.status;
      if (!out.result.diagnostics.failed_stage.empty()) {
        std::cerr << " at stage " << out.result.diagnostics.failed_stage << " ("
                  << out.result.diagnostics.error_kind << ")";
      }
      std::cerr << ": " << out.result.diagnostics.message << "\n";
      return kExitPipeline;
    }
    return kExitOk;
  } catch (const Error& e) {
    std::cerr << "init: " << e.what() << "\n";
    return exit_for(e);
  }
}

int cmd_evaluate(const EvaluateOptions& o) {
  try {
    const Alignment align = alignment_from_string(o.align);
    if (o.results.empty()) throw Error(ErrorKind::kConfig, "at least one --result is required");
    if (o.out.empty()) throw Error(ErrorKind::kConfig, "--out is required");
    const Dataset d = read_dataset(o.dataset);
    ensure_dir(o.out);
    json report;
    report["schema_version"] = MetricsReport::kSchemaVersion;
    report["alignment"] = std::string(to_string(align));
    report["runs"] = json::array();
    for (std::size_t k = 0; k < o.results.size(); ++k) {
      const LoadedResult lr = result_from_json(read_text(o.results[k]));
      MetricsReport m = evaluate_states(lr.keyframes, d.truth.states, half_camera_period(d.truth), align);
      m.status = lr.status;
      m.indicator_p50 = percentile(lr.indicators, 50);
      m.indicator_p95 = percentile(lr.indicators, 95);
      m.indicator_max = percentile(lr.indicators, 100);
      const std::string csv = o.results.size() == 1 ? "errors.csv" : fmt::format("errors_{}.csv", k);
      write_text(o.out / csv, errors_to_csv(m));
      json run = json::parse(metrics_to_json(m, align));
      run["source"] = o.results[k].string();
      run["deviation"] = lr.deviation;
      run["plot_data"] = csv;
      report["runs"].push_back(run);
      std::cout << fmt::format("{} ({}): translation_rmse [{:.6f} {:.6f} {:.6f}] velocity_rmse [{:.6f} {:.6f} {:.6f}]\n",
                               o.results[k].string(), lr.deviation, m.translation_rmse.x(), m.translation_rmse.y(),
                               m.translation_rmse.z(), m.velocity_rmse.x(), m.velocity_rmse.y(), m.velocity_rmse.z());
    }
    write_text(o.out / "report.json", report.dump(2) + "\n");
    return kExitOk;
  } catch (const Error& e) {
    std::cerr << "evaluate: " << e.what() << "\n";
    return exit_for(e);
  }
}

int cmd_sweep(const SweepOptions& o) {
  try {
    if (o.trials < 1) throw Error(ErrorKind::kConfig, "--trials must be at least 1");
    if (o.jobs < 1) throw Error(ErrorKind::kConfig, "--jobs must be at least 1");
    if (o.out.empty()) throw Error(ErrorKind::kConfig, "--out is required");
    const PipelineConfig config = resolve_config(o.config, o.deviation, std::nullopt);
    struct Cell {
      std::string scene, profile;
    };
    std::vector<Cell> cells;
    for (const auto& s : o.scenes) {
      for (const auto& p : o.profiles) {
        scene_preset(s);
        profile_from_string(p);
        cells.push_back({s, p});
      }
    }
    const std::size_t n = cells.size() * static_cast<std::size_t>(o.trials);
    std::vector<TrialOutcome> outcomes(n);
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
      for (std::size_t i = next++; i < n; i = next++) {
        const Cell& c = cells[i / static_cast<std::size_t>(o.trials)];
        const int trial = static_cast<int>(i % static_cast<std::size_t>(o.trials));
        SimulationConfig sim = simulation_preset(c.scene, c.profile, trial_seed(o.seed, i));
        if (o.noise_free) sim = noise_free(sim);
        try {
          outcomes[i] = run_trial(sim, config);
        } catch (const std::exception& e) {
          // One bad trial must not take the pool down; it shows up in trials.csv.
          outcomes[i].scene = c.scene;
          outcomes[i].profile = c.profile;
          outcomes[i].seed = sim.seed;
          outcomes[i].status = "error";
          spdlog::warn("trial {} of {}/{} threw: {}", trial, c.scene, c.profile, e.what());
        }
        outcomes[i].trial = trial;
      }
    };
    std::vector<std::thread> pool;
    for (int k = 1; k < o.jobs; ++k) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();

    ensure_dir(o.out);
    fmt::memory_buffer trials;
    fmt::format_to(std::back_inserter(trials),
                   "scene,profile,trial,seed,status,selection_ok,scale,scale_true,scale_rel_err,"
                   "rmse_x,rmse_y,rmse_z,rmse_vx,rmse_vy,rmse_vz,rmse_roll,rmse_pitch,rmse_yaw\n");
    for (const auto& t : outcomes) {
      fmt::format_to(std::back_inserter(trials),
                     "{},{},{},{},{},{},{:.9g},{:.9g},{:.9g},{:.9g},{:.9g},{:.9g},{:.9g},{:.9g},{:.9g},{:.9g},{:.9g},{:.9g}\n",
                     t.scene, t.profile, t.trial, t.seed, t.status, t.selection_ok ? 1 : 0, t.scale, t.scale_true,
                     t.scale_rel_err, t.translation_rmse.x(), t.translation_rmse.y(), t.translation_rmse.z(),
                     t.velocity_rmse.x(), t.velocity_rmse.y(), t.velocity_rmse.z(), t.euler_rmse.x(),
                     t.euler_rmse.y(), t.euler_rmse.z());
    }
    write_text(o.out / "trials.csv", fmt::to_string(trials));

    fmt::memory_buffer agg;
    fmt::format_to(std::back_inserter(agg),
                   "scene,profile,trials,initialized_rate,selection_rate,scale_err_p50,scale_err_p95,"
                   "rmse_xyz_max_p50,rmse_xyz_max_p95,rmse_v_max_p50,rmse_roll_p95\n");
    for (std::size_t c = 0; c < cells.size(); ++c) {
      int initialized = 0, selected = 0;
      std::vector<double> scale_err, rmse, rmse_v, roll;
      for (int k = 0; k < o.trials; ++k) {
        const TrialOutcome& t = outcomes[c * static_cast<std::size_t>(o.trials) + static_cast<std::size_t>(k)];
        if (t.status != "initialized") continue;
        ++initialized;
        selected += t.selection_ok ? 1 : 0;
        scale_err.push_back(t.scale_rel_err);
        rmse.push_back(t.translation_rmse.maxCoeff());
        rmse_v.push_back(t.velocity_rmse.maxCoeff());
        roll.push_back(t.euler_rmse.x());
      }
      const double trials_d = static_cast<double>(o.trials);
      fmt::format_to(std::back_inserter(agg), "{},{},{},{:.9g},{:.9g},{:.9g},{:.9g},{:.9g},{:.9g},{:.9g},{:.9g}\n",
                     cells[c].scene, cells[c].profile, o.trials, initialized / trials_d, selected / trials_d,
                     percentile(scale_err, 50), percentile(scale_err, 95), percentile(rmse, 50),
                     percentile(rmse, 95), percentile(rmse_v, 50), percentile(roll, 95));
    }
    const std::string aggregate = fmt::to_string(agg);
    write_text(o.out / "aggregate.csv", aggregate);
    std::cout << aggregate;
    return kExitOk;
  } catch (const Error& e) {
    std::cerr << "sweep: " << e.what() << "\n";
    return exit_for(e);
  }
}

}  // namespace planar_init
