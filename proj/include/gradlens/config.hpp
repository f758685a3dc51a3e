#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>

#include <nlohmann/json.hpp>

#include "gradlens/grad_probe.hpp"
#include "gradlens/grpo.hpp"
#include "gradlens/policy.hpp"
#include "gradlens/scheduler.hpp"
#include "gradlens/task_suite.hpp"

namespace gradlens {

enum class BatchAssignment { per_group, per_batch };
std::string to_string(BatchAssignment a);
BatchAssignment parse_batch_assignment(const std::string& name);

struct SamplerConfig {
  SamplerMode mode = SamplerMode::uniform;
  double temperature = kDefaultTemperature;
  double floor = kDefaultFloor;
  BatchAssignment assignment = BatchAssignment::per_group;
};

struct ProbeConfig {
  double ema_coeff = 0.95;
  SubsetSpec subset;
  std::string split_rule = "positional";
};

struct MetricsConfig {
  std::size_t gain_window = 25;
  std::size_t num_points = 3;
  double norm_smoothing = 0.9;
  double reward_smoothing = 0.7;
  double length_smoothing = 0.5;
  double dominance_threshold = 5.0;
  std::size_t final_window = 10;  // observations averaged for "final reward"
};

struct ExperimentConfig {
  std::string name = "experiment";
  std::uint64_t seed = 0;
  std::string output_dir;  // empty: resolved from GRADLENS_OUT at run time
  std::size_t workers = 1;
  std::size_t checkpoint_every = 0;  // 0: final checkpoint only

  PolicySpec policy;
  TaskListConfig tasks;
  TrainConfig train;
  SamplerConfig sampler;
  ProbeConfig probe;
  MetricsConfig metrics;

  /// Validates every section, including the resolved task list against the
  /// policy head. Throws ConfigError.
  void validate() const;
};

/// Parses the INI-style experiment document. Unknown sections or keys are
/// rejected. When [metrics] gain_window is absent it defaults to 75 for the
/// multi_domain_analog preset and 25 otherwise.
ExperimentConfig parse_config(const std::string& text);
ExperimentConfig load_config(const std::filesystem::path& path);

/// Canonical JSON form. `include_runtime` adds output_dir and workers, which
/// do not affect results and are left out of the config hash.
nlohmann::json config_to_json(const ExperimentConfig& config, bool include_runtime = true);

}  // namespace gradlens
