#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "gradlens/rng.hpp"

namespace gradlens {

enum class TaskFamily { scaled_bandit, parity, modular_add, noisy_channel };

std::string to_string(TaskFamily family);
TaskFamily parse_task_family(const std::string& name);

/// One synthetic task with a verifiable answer.
///
/// Every instance reserves the last action (action_count - 1) as the
/// "malformed" answer; correct answers are drawn from the remaining
/// well-formed actions.
struct TaskSpec {
  std::string id;
  TaskFamily family = TaskFamily::scaled_bandit;
  std::size_t context_dim = 8;
  std::size_t action_count = 5;
  double feature_scale = 1.0;
  double difficulty = 0.0;
  std::uint64_t seed = 0;
  std::size_t response_len = 1;  // tokens per response; the last one is the answer
  std::size_t max_padding = 0;   // per-instance padding count, logged only

  void validate() const;
  std::size_t malformed_action() const { return action_count - 1; }
  std::size_t well_formed_count() const { return action_count - 1; }
};

struct Instance {
  std::vector<double> context;
  std::size_t correct_action = 0;
  bool format_trap = true;
  std::size_t padding_len = 0;
};

/// Draws one instance; consumes the stream. The context is generated at unit
/// scale and multiplied by feature_scale as the final step.
Instance sample_instance(const TaskSpec& task, RngStream& rng);

/// Stream owning the n-th instance of a task under a given experiment seed.
RngStream instance_stream(std::uint64_t experiment_seed, const TaskSpec& task,
                          std::uint64_t instance_index);

/// Noise-free labelling rule recovered from a context alone. Only meaningful
/// when difficulty == 0 (parity is always noise-free).
std::size_t derive_label(const TaskSpec& task, const std::vector<double>& context);

inline constexpr double kRewardCorrect = 1.0;
inline constexpr double kRewardWrongAnswer = 0.1;
inline constexpr double kRewardMalformed = 0.0;

/// Tiered verifiable reward: 0.0 malformed, 0.1 well-formed but wrong,
/// 1.0 correct.
double score(const TaskSpec& task, const Instance& instance, std::size_t action);

/// Task list as declared by an experiment: either a preset or explicit specs.
struct TaskListConfig {
  std::optional<std::string> preset;
  std::vector<TaskSpec> custom;
};

std::vector<TaskSpec> preset_tasks(const std::string& name);

/// Validated task list in declaration order (preset first). Task ids must be
/// unique across the preset and custom entries.
std::vector<TaskSpec> task_registry(const TaskListConfig& config);

}  // namespace gradlens
