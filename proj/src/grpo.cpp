#include "gradlens/grpo.hpp"

#include <cmath>
#include <numeric>

#include "gradlens/errors.hpp"

namespace gradlens {

void TrainConfig::validate() const {
  if (batch_size == 0) throw ConfigError("batch_size must be positive");
  if (group_size < 2) throw ConfigError("rollouts_per_prompt must be at least 2");
  if (batch_size % group_size != 0) {
    throw ConfigError("batch_size must be divisible by rollouts_per_prompt");
  }
  if (!(learning_rate > 0.0)) throw ConfigError("learning_rate must be positive");
  if (!(kl_coeff >= 0.0)) throw ConfigError("kl_coefficient must be nonnegative");
  if (!(entropy_coeff >= 0.0)) throw ConfigError("entropy_coefficient must be nonnegative");
  if (!(grad_clip > 0.0)) throw ConfigError("grad_clip must be positive");
  if (!(clip_ratio > 0.0)) throw ConfigError("clip_ratio must be positive");
  if (total_steps == 0) throw ConfigError("total_steps must be positive");
}

namespace {

std::size_t draw_categorical(const std::vector<double>& probs, RngStream& rng) {
  const double u = rng.uniform();
  double acc = 0.0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    acc += probs[i];
    if (u < acc) return i;
  }
  // u landed in the rounding slack above the cumulative sum
  for (std::size_t i = probs.size(); i-- > 0;) {
    if (probs[i] > 0.0) return i;
  }
  return probs.size() - 1;
}

}  // namespace

RolloutGroup rollout_group(const Policy& policy, const ParamVector& params, const TaskSpec& task,
                           std::size_t group_size, RngStream& task_rng, RngStream& action_rng) {
  if (group_size < 2) throw ContractViolation("group size must be at least 2");
  RolloutGroup group;
  group.task_id = task.id;
  group.instance = sample_instance(task, task_rng);
  group.response_len = task.response_len;

  const auto log_probs = policy.log_probs(params, group.instance.context);
  std::vector<double> probs(log_probs.size());
  for (std::size_t a = 0; a < probs.size(); ++a) probs[a] = std::exp(log_probs[a]);

  group.actions.resize(group_size);
  group.tokens.resize(group_size * task.response_len);
  group.rewards.resize(group_size);
  group.log_probs.resize(group_size);
  group.advantages.assign(group_size, 0.0);
  for (std::size_t i = 0; i < group_size; ++i) {
    double lp = 0.0;
    for (std::size_t t = 0; t < task.response_len; ++t) {
      const std::size_t a = draw_categorical(probs, action_rng);
      group.tokens[i * task.response_len + t] = a;
      lp += log_probs[a];
    }
    group.actions[i] = group.tokens[(i + 1) * task.response_len - 1];
    group.log_probs[i] = lp;
    group.rewards[i] = score(task, group.instance, group.actions[i]);
  }
  return group;
}

RolloutGroup rollout_group(const Policy& policy, const ParamVector& params, const TaskSpec& task,
                           std::size_t group_size, RngStream& rng) {
  return rollout_group(policy, params, task, group_size, rng, rng);
}

std::vector<double> group_advantages(std::span<const double> rewards) {
  if (rewards.size() < 2) throw ContractViolation("group advantages need at least two rewards");
  std::vector<double> adv(rewards.size(), 0.0);
  bool all_equal = true;
  for (double r : rewards) all_equal = all_equal && r == rewards.front();
  if (all_equal) return adv;

  const double n = static_cast<double>(rewards.size());
  const double mean = std::accumulate(rewards.begin(), rewards.end(), 0.0) / n;
  double var = 0.0;
  for (double r : rewards) var += (r - mean) * (r - mean);
  const double stddev = std::sqrt(var / n);
  for (std::size_t i = 0; i < rewards.size(); ++i) {
    adv[i] = (rewards[i] - mean) / (stddev + kAdvantageEpsilon);
  }
  return adv;
}

void apply_advantages(RolloutGroup& group) {
  group.advantages = group_advantages(group.rewards);
  group.has_advantages = true;
}

namespace {

void require_advantages(const RolloutGroup& group) {
  if (!group.has_advantages) {
    throw ContractViolation("group for task '" + group.task_id + "' has no advantages");
  }
  if (group.size() == 0 || group.advantages.size() != group.size() ||
      group.tokens.size() != group.size() * group.response_len) {
    throw ShapeError("malformed rollout group");
  }
}

}  // namespace

double surrogate_objective(const Policy& policy, const ParamVector& params,
                           std::span<const RolloutGroup> groups, const ParamVector& ref_params,
                           const TrainConfig& config) {
  double total = 0.0;
  std::size_t rollouts = 0;
  for (const auto& group : groups) {
    require_advantages(group);
    const auto& ctx = group.instance.context;
    const auto lp = policy.log_probs(params, ctx);
    const auto lp_ref = policy.log_probs(ref_params, ctx);
    double entropy = 0.0;
    double kl = 0.0;
    for (std::size_t a = 0; a < lp.size(); ++a) {
      const double p = std::exp(lp[a]);
      entropy -= p * lp[a];
      kl += p * (lp[a] - lp_ref[a]);
    }
    const double L = static_cast<double>(group.response_len);
    for (std::size_t i = 0; i < group.size(); ++i) {
      double token_mean = 0.0;
      for (std::size_t a : group.response(i)) token_mean += lp[a];
      token_mean /= L;
      total += group.advantages[i] * token_mean + config.entropy_coeff * entropy -
               config.kl_coeff * kl;
    }
    rollouts += group.size();
  }
  if (rollouts == 0) throw ContractViolation("surrogate needs at least one group");
  return total / static_cast<double>(rollouts);
}

ParamVector group_gradient(const Policy& policy, const ParamVector& params,
                           const RolloutGroup& group, const ParamVector& ref_params,
                           const TrainConfig& config) {
  require_advantages(group);
  const auto& ctx = group.instance.context;
  const std::size_t K = policy.spec().action_count;
  const double G = static_cast<double>(group.size());
  const double L = static_cast<double>(group.response_len);

  // Every term is a combination of score functions grad log pi(a|s), so
  // collect one weight per action and contract once.
  std::vector<double> weight(K, 0.0);
  for (std::size_t i = 0; i < group.size(); ++i) {
    for (std::size_t a : group.response(i)) weight[a] += group.advantages[i] / (L * G);
  }
  if (config.entropy_coeff != 0.0 || config.kl_coeff != 0.0) {
    const auto lp = policy.log_probs(params, ctx);
    const auto lp_ref = policy.log_probs(ref_params, ctx);
    for (std::size_t a = 0; a < K; ++a) {
      const double p = std::exp(lp[a]);
      // grad H = -sum_a p_a log p_a grad log p_a
      // grad KL = sum_a p_a (log p_a - log q_a) grad log p_a
      weight[a] += -config.entropy_coeff * p * lp[a] - config.kl_coeff * p * (lp[a] - lp_ref[a]);
    }
  }

  ParamVector grad = ParamVector::zeros_like(params);
  for (std::size_t a = 0; a < K; ++a) {
    if (weight[a] == 0.0) continue;
    grad.axpy(weight[a], policy.grad_log_prob(params, ctx, a));
  }
  return grad;
}

ParamVector pairwise_sum(std::span<const ParamVector> grads) {
  if (grads.empty()) throw ContractViolation("pairwise_sum of an empty list");
  if (grads.size() == 1) return grads.front();
  const std::size_t half = (grads.size() + 1) / 2;
  ParamVector left = pairwise_sum(grads.first(half));
  left.axpy(1.0, pairwise_sum(grads.subspan(half)));
  return left;
}

ParamVector batch_gradient(const Policy& policy, const ParamVector& params,
                           std::span<const RolloutGroup> groups, const ParamVector& ref_params,
                           const TrainConfig& config) {
  if (groups.empty()) throw ContractViolation("batch_gradient needs at least one group");
  std::vector<ParamVector> per_group;
  per_group.reserve(groups.size());
  for (const auto& g : groups) per_group.push_back(group_gradient(policy, params, g, ref_params, config));
  ParamVector out = pairwise_sum(per_group);
  out.scale(1.0 / static_cast<double>(groups.size()));
  return out;
}

ParamVector mixture_gradient(std::span<const ParamVector> per_task_grads) {
  if (per_task_grads.empty()) throw ContractViolation("mixture of zero gradients");
  for (const auto& g : per_task_grads) {
    if (g.size() != per_task_grads.front().size()) throw ShapeError("mixture: length mismatch");
  }
  ParamVector out = pairwise_sum(per_task_grads);
  out.scale(1.0 / static_cast<double>(per_task_grads.size()));
  return out;
}

ParamVector clip_gradient(const ParamVector& grad, double max_norm) {
  ParamVector out = grad;
  const double n = grad.norm();
  if (n > max_norm) out.scale(max_norm / n);
  return out;
}

ParamVector sgd_step(const ParamVector& params, const ParamVector& grad, const TrainConfig& config) {
  if (!grad.all_finite()) throw NumericError("non-finite gradient; step aborted");
  if (grad.size() != params.size()) throw ShapeError("sgd_step: length mismatch");
  ParamVector next = params;
  next.axpy(config.learning_rate, clip_gradient(grad, config.grad_clip));
  if (!next.all_finite()) throw NumericError("non-finite parameters after update; step aborted");
  return next;
}

}  // namespace gradlens
