#pragma once

#include "planar_init/config.hpp"
#include "planar_init/metrics.hpp"
#include "planar_init/pipeline.hpp"
#include "planar_init/simulator.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace planar_init {

/// Process exit codes of the CLI.
enum ExitCode : int { kExitOk = 0, kExitUsage = 1, kExitIo = 2, kExitPipeline = 3 };

struct GenerateOptions {
  std::string scene = "helipad";
  std::string profile = "vertical";
  std::uint64_t seed = 1;
  std::filesystem::path out;
  bool noise_free = false;
  std::optional<double> noise_px;
  bool heteroscedastic = false;
  std::optional<int> features;
};

struct InitOptions {
  std::filesystem::path dataset;
  std::filesystem::path out;
  std::optional<std::filesystem::path> config;
  std::optional<std::string> deviation;
  std::optional<double> fixed_deviation_px;
  std::uint64_t seed = 1;
  std::string align = "none";
};

struct EvaluateOptions {
  std::vector<std::filesystem::path> results;
  std::filesystem::path dataset;
  std::filesystem::path out;
  std::string align = "none";
};

struct SweepOptions {
  std::vector<std::string> scenes = {"helipad"};
  std::vector<std::string> profiles = {"vertical"};
  int trials = 1;
  std::uint64_t seed = 1;
  int jobs = 1;
  std::optional<std::filesystem::path> config;
  std::optional<std::string> deviation;
  std::filesystem::path out;
  bool noise_free = false;
};

int cmd_generate(const GenerateOptions& options);
int cmd_init(const InitOptions& options);
int cmd_evaluate(const EvaluateOptions& options);
int cmd_sweep(const SweepOptions& options);

/// Result JSON (deterministic: no wall-clock numbers).
std::string result_to_json(const PipelineOutput& output, const PipelineConfig& config,
                           std::uint64_t seed);

struct LoadedResult {
  std::string status;
  std::string deviation;
  std::vector<StateSample> keyframes;
  std::vector<double> indicators;
};
LoadedResult result_from_json(const std::string& text);

std::string metrics_to_json(const MetricsReport& report, Alignment alignment);
std::string errors_to_csv(const MetricsReport& report);

/// True when every normal-based decision picked the candidate nearest the
/// true ground normal (or one within 1e-6 of it). `checked` is false when no
/// decision was made.
bool selection_matches_truth(const InitializationResult& result, const GroundTruth& truth,
                             bool* checked = nullptr);

struct TrialOutcome {
  std::string scene;
  std::string profile;
  int trial = 0;
  std::uint64_t seed = 0;
  std::string status;
  bool selection_checked = false;
  bool selection_ok = false;
  double scale = 0.0;
  double scale_true = 0.0;
  double scale_rel_err = 0.0;
  Vec3 translation_rmse = Vec3::Zero();
  Vec3 velocity_rmse = Vec3::Zero();
  Vec3 euler_rmse = Vec3::Zero();
  Vec3 max_abs_translation = Vec3::Zero();
};

/// Simulates one take-off and runs the pipeline on it; metrics use
/// first-position alignment.
TrialOutcome run_trial(const SimulationConfig& sim, const PipelineConfig& config);

/// Seed of trial k under a master seed.
std::uint64_t trial_seed(std::uint64_t master, std::uint64_t index);

}  // namespace planar_init
