#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "gradlens/param_vector.hpp"
#include "gradlens/policy.hpp"
#include "gradlens/rng.hpp"
#include "gradlens/task_suite.hpp"

namespace gradlens {

struct TrainConfig {
  std::size_t batch_size = 128;
  std::size_t group_size = 16;  // rollouts per prompt
  double learning_rate = 5e-7;
  double kl_coeff = 1e-3;
  double entropy_coeff = 1e-3;
  double grad_clip = 1.0;
  double clip_ratio = 0.2;  // inert: exactly one on-policy step per batch
  std::size_t total_steps = 100;

  void validate() const;
  std::size_t groups_per_batch() const { return batch_size / group_size; }
};

/// G responses to one instance. `tokens` holds G * response_len actions,
/// row-major; the last token of each response is its answer in `actions`.
struct RolloutGroup {
  std::string task_id;
  Instance instance;
  std::size_t response_len = 1;
  std::vector<std::size_t> actions;
  std::vector<std::size_t> tokens;
  std::vector<double> rewards;
  std::vector<double> log_probs;
  std::vector<double> advantages;
  bool has_advantages = false;

  std::size_t size() const { return actions.size(); }
  std::span<const std::size_t> response(std::size_t i) const {
    return std::span<const std::size_t>(tokens).subspan(i * response_len, response_len);
  }
};

/// Samples one instance from `task_rng`, then G responses i.i.d. from the
/// current policy using `action_rng`. Advantages are left zero and unfilled.
RolloutGroup rollout_group(const Policy& policy, const ParamVector& params, const TaskSpec& task,
                           std::size_t group_size, RngStream& task_rng, RngStream& action_rng);
RolloutGroup rollout_group(const Policy& policy, const ParamVector& params, const TaskSpec& task,
                           std::size_t group_size, RngStream& rng);

inline constexpr double kAdvantageEpsilon = 1e-8;

/// (r - mean) / (population std + 1e-8); exactly zero when all rewards match.
std::vector<double> group_advantages(std::span<const double> rewards);
void apply_advantages(RolloutGroup& group);

/// Scalar surrogate whose gradient batch_gradient returns:
///   mean over rollouts of  A_i * mean_t log pi(a_it|s)
///                        + entropy_coeff * H(pi(.|s))
///                        - kl_coeff * KL(pi(.|s) || pi_ref(.|s)).
double surrogate_objective(const Policy& policy, const ParamVector& params,
                           std::span<const RolloutGroup> groups, const ParamVector& ref_params,
                           const TrainConfig& config);

/// Ascent direction of the surrogate restricted to one group.
ParamVector group_gradient(const Policy& policy, const ParamVector& params,
                           const RolloutGroup& group, const ParamVector& ref_params,
                           const TrainConfig& config);

/// Fixed-order pairwise sum, so the result does not depend on how the
/// inputs were produced.
ParamVector pairwise_sum(std::span<const ParamVector> grads);

/// Ascent direction over the whole batch: the average of per-group gradients
/// (all groups share G, so this equals the per-rollout mean).
ParamVector batch_gradient(const Policy& policy, const ParamVector& params,
                           std::span<const RolloutGroup> groups, const ParamVector& ref_params,
                           const TrainConfig& config);

/// Uniform mixture of per-task gradients: (1/M) sum_i g_i.
ParamVector mixture_gradient(std::span<const ParamVector> per_task_grads);

/// Gradient after norm clipping to config.grad_clip.
ParamVector clip_gradient(const ParamVector& grad, double max_norm);

/// Plain SGD ascent: params + learning_rate * clip(grad). Throws NumericError
/// (leaving params untouched) when grad is not finite.
ParamVector sgd_step(const ParamVector& params, const ParamVector& grad, const TrainConfig& config);

}  // namespace gradlens
