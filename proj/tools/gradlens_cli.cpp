// gradlens: command-line front end for training runs, temperature sweeps,
// property validation and log export.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "gradlens/config.hpp"
#include "gradlens/convex.hpp"
#include "gradlens/errors.hpp"
#include "gradlens/harness.hpp"
#include "gradlens/io.hpp"
#include "gradlens/validation.hpp"

namespace fs = std::filesystem;
using namespace gradlens;

namespace {

constexpr int kExitFailure = 1;
constexpr int kExitUsage = 2;

int cmd_run(const std::string& config_path, std::optional<std::uint64_t> seed,
            const std::string& out, std::optional<std::size_t> workers) {
  ExperimentConfig config = load_config(config_path);
  if (seed) config.seed = *seed;
  if (!out.empty()) config.output_dir = out;
  if (workers) config.workers = *workers;
  const auto manifest = run(config);
  std::cout << manifest.run_dir.string() << ": " << manifest.status << " (" << manifest.end_step
            << " steps)\n";
  return manifest.ok() ? 0 : kExitFailure;
}

int cmd_sweep(const std::string& config_path, const std::string& grid_path, const std::string& out) {
  ExperimentConfig config = load_config(config_path);
  if (!out.empty()) config.output_dir = out;
  const auto result = sweep(config, load_grid(grid_path));
  bool all_ok = true;
  for (const auto& m : result.runs) {
    std::cout << m.run_dir.string() << ": " << m.status << "\n";
    all_ok = all_ok && m.ok();
  }
  std::cout << "comparison: " << result.comparison_csv.string() << "\n";
  return all_ok ? 0 : kExitFailure;
}

int cmd_validate(const std::string& suite) {
  std::vector<std::string> suites;
  if (suite == "all") {
    suites = validation_suites();
  } else {
    suites.push_back(suite);
  }
  nlohmann::json out = nlohmann::json::array();
  bool ok = true;
  for (const auto& s : suites) {
    const auto report = validate_suite(s);
    ok = ok && report.passed();
    out.push_back(report.to_json());
  }
  std::cout << (out.size() == 1 ? out[0] : out).dump(2) << "\n";
  return ok ? 0 : kExitFailure;
}

int cmd_export(const std::string& run_dir, const std::string& format) {
  const auto records = read_step_records(fs::path(run_dir) / "steps.csv");
  if (format == "csv") {
    write_step_records(std::cout, records);
  } else {
    for (const auto& r : records) std::cout << step_record_json(r).dump() << "\n";
  }
  return 0;
}

int cmd_convex_demo(const std::string& out, double stiff, double soft, double step_size,
                    std::size_t steps) {
  const QuadraticProblem a({stiff}, {0.0});
  const QuadraticProblem b({soft}, {0.0});
  const auto demo = cross_task_demo(a, b, {1.0}, {1.0}, step_size, steps);
  std::vector<StepRecord> records;
  for (std::size_t t = 0; t < steps; ++t) {
    for (const auto* tr : {&demo.trace_a, &demo.trace_b}) {
      const auto& p = (*tr)[t];
      StepRecord r;
      r.step = t;
      r.task_id = tr == &demo.trace_a ? "stiff" : "soft";
      r.reward_mean = -p.suboptimality;
      r.abs_adv_mean = p.gain;
      r.sq_norm_est = p.sq_grad_norm;
      r.norm_est = std::sqrt(p.sq_grad_norm);
      r.sampler_prob = 0.5;
      r.response_len = 1;
      records.push_back(r);
    }
  }
  std::ofstream file(out);
  if (!file) throw std::runtime_error("cannot write " + out);
  write_step_records(file, records);
  nlohmann::json summary = {{"within_pearson_stiff", demo.within_pearson_a},
                            {"within_pearson_soft", demo.within_pearson_b},
                            {"crossover_steps", demo.crossover_steps}};
  std::cout << summary.dump(2) << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"gradlens: multi-task policy-gradient imbalance simulator"};
  app.require_subcommand(1);

  std::string config_path, grid_path, out, run_dir, format = "csv", suite;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> workers;

  auto* run_cmd = app.add_subcommand("run", "Train one experiment");
  run_cmd->add_option("--config", config_path, "Experiment config (INI)")->required()->check(CLI::ExistingFile);
  run_cmd->add_option("--seed", seed, "Override the experiment seed");
  run_cmd->add_option("--out", out, "Run directory (default: $GRADLENS_OUT/<name>)");
  run_cmd->add_option("--workers", workers, "Rollout worker threads");

  auto* sweep_cmd = app.add_subcommand("sweep", "Uniform vs gradient-proportional temperature sweep");
  sweep_cmd->add_option("--config", config_path)->required()->check(CLI::ExistingFile);
  sweep_cmd->add_option("--grid", grid_path)->required()->check(CLI::ExistingFile);
  sweep_cmd->add_option("--out", out, "Sweep root directory");

  auto* validate_cmd = app.add_subcommand("validate", "Run a property suite");
  validate_cmd->add_option("--suite", suite, "estimator | convex | gradients | sampler | all")->required();

  auto* export_cmd = app.add_subcommand("export", "Print a run's StepRecord stream");
  export_cmd->add_option("--run", run_dir)->required()->check(CLI::ExistingDirectory);
  export_cmd->add_option("--format", format)->check(CLI::IsMember({"csv", "jsonl"}));

  double stiff = 100.0, soft = 1.0, step_size = 0.015;
  std::size_t steps = 40;
  auto* convex_cmd = app.add_subcommand("convex-demo", "Two-quadratic gain/gradient crossover trace");
  convex_cmd->add_option("--out", out, "StepRecord CSV to write")->required();
  convex_cmd->add_option("--stiff", stiff);
  convex_cmd->add_option("--soft", soft);
  convex_cmd->add_option("--step-size", step_size);
  convex_cmd->add_option("--steps", steps);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }

  try {
    if (*run_cmd) return cmd_run(config_path, seed, out, workers);
    if (*sweep_cmd) return cmd_sweep(config_path, grid_path, out);
    if (*validate_cmd) return cmd_validate(suite);
    if (*export_cmd) return cmd_export(run_dir, format);
    if (*convex_cmd) return cmd_convex_demo(out, stiff, soft, step_size, steps);
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitFailure;
  }
  return kExitUsage;
}
