// planar-init: generate simulated take-offs, run the initializer, evaluate
// results and sweep seeded trials. See README.md for the file formats.

#include "planar_init/harness.hpp"

#include "CLI11.hpp"
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <cstdlib>
#include <string>

namespace {

void setup_logging() {
  auto logger = spdlog::stderr_color_mt("planar-init");
  spdlog::set_default_logger(logger);
  spdlog::set_level(spdlog::level::warn);
  if (const char* env = std::getenv("PLANAR_INIT_LOG")) {
    spdlog::set_level(spdlog::level::from_str(env));
  }
}

}  // namespace

int main(int argc, char** argv) {
  using namespace planar_init;
  setup_logging();

  CLI::App app{"Planar-scene visual-inertial initialization toolkit"};
  app.require_subcommand(1);

  GenerateOptions gen;
  auto* generate = app.add_subcommand("generate", "Simulate a take-off dataset");
  generate->add_option("--scene", gen.scene, "helipad|asphalt|lawn")->capture_default_str();
  generate->add_option("--profile", gen.profile, "vertical|oblique|hover")->capture_default_str();
  generate->add_option("--seed", gen.seed, "Master seed")->capture_default_str();
  generate->add_option("--out", gen.out, "Output dataset directory")->required();
  generate->add_flag("--noise-free", gen.noise_free, "Disable pixel and IMU noise");
  generate->add_option("--noise-px", gen.noise_px, "Pixel noise std");
  generate->add_flag("--heteroscedastic", gen.heteroscedastic, "Per-feature noise std in [0.2, 2] px");
  generate->add_option("--features", gen.features, "Scene feature count");

  InitOptions init;
  auto* init_cmd = app.add_subcommand("init", "Run the initializer on a dataset");
  init_cmd->add_option("--dataset", init.dataset, "Dataset directory")->required();
  init_cmd->add_option("--out", init.out, "Output directory")->required();
  init_cmd->add_option("--config", init.config, "Pipeline config JSON");
  init_cmd->add_option("--deviation", init.deviation, "fixed|dynamic");
  init_cmd->add_option("--fixed-deviation-px", init.fixed_deviation_px, "Fixed pixel deviation");
  init_cmd->add_option("--seed", init.seed, "Robust-sampling seed")->capture_default_str();
  init_cmd->add_option("--align", init.align, "none|first")->capture_default_str();

  EvaluateOptions eval;
  auto* evaluate = app.add_subcommand("evaluate", "Score result files against ground truth");
  evaluate->add_option("--result", eval.results, "Result JSON (repeatable)")->required();
  evaluate->add_option("--dataset", eval.dataset, "Dataset directory")->required();
  evaluate->add_option("--out", eval.out, "Output directory")->required();
  evaluate->add_option("--align", eval.align, "none|first")->capture_default_str();

  SweepOptions sweep;
  auto* sweep_cmd = app.add_subcommand("sweep", "Seeded Monte-Carlo trials over scenes and profiles");
  sweep_cmd->add_option("--scene", sweep.scenes, "Scene presets (repeatable)")->capture_default_str();
  sweep_cmd->add_option("--profile", sweep.profiles, "Profiles (repeatable)")->capture_default_str();
  sweep_cmd->add_option("--trials", sweep.trials, "Trials per cell")->capture_default_str();
  sweep_cmd->add_option("--seed", sweep.seed, "Master seed")->capture_default_str();
  sweep_cmd->add_option("--jobs", sweep.jobs, "Worker threads")->capture_default_str();
  sweep_cmd->add_option("--config", sweep.config, "Pipeline config JSON");
  sweep_cmd->add_option("--deviation", sweep.deviation, "fixed|dynamic");
  sweep_cmd->add_option("--out", sweep.out, "Output directory")->required();
  sweep_cmd->add_flag("--noise-free", sweep.noise_free, "Disable pixel and IMU noise");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  if (generate->parsed()) return cmd_generate(gen);
  if (init_cmd->parsed()) return cmd_init(init);
  if (evaluate->parsed()) return cmd_evaluate(eval);
  return cmd_sweep(sweep);
}
