#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "gradlens/param_vector.hpp"

namespace gradlens {

enum class PolicyArch { linear_softmax, mlp1 };

std::string to_string(PolicyArch arch);
PolicyArch parse_policy_arch(const std::string& name);

struct PolicySpec {
  PolicyArch arch = PolicyArch::linear_softmax;
  std::size_t context_dim = 8;
  std::size_t action_count = 5;
  std::size_t hidden_dim = 16;  // mlp1 only
  std::uint64_t init_seed = 0;

  /// Throws ConfigError on degenerate dimensions.
  void validate() const;
  std::size_t param_count() const;
  std::vector<Segment> layout() const;
};

/// Numerically stable log-softmax.
std::vector<double> log_softmax(std::span<const double> logits);
std::vector<double> softmax(std::span<const double> logits);

/// Discrete-action policy over real-valued contexts.
///
/// linear_softmax: one weight block per action, logit_a = w_a . x, segment
/// "logits". mlp1: h = tanh(W1 x + b1), logits = W2 h + b2, segments
/// "hidden" (W1 row-major, then b1) and "output" (W2 row-major, then b2).
class Policy {
 public:
  explicit Policy(PolicySpec spec);

  const PolicySpec& spec() const { return spec_; }

  /// Deterministic in spec.init_seed. linear_softmax starts at zero; mlp1
  /// draws every entry from U[-1/sqrt(fan_in), 1/sqrt(fan_in)].
  ParamVector init_params() const;

  std::vector<double> logits(const ParamVector& params, std::span<const double> context) const;
  std::vector<double> log_probs(const ParamVector& params, std::span<const double> context) const;
  std::vector<double> action_distribution(const ParamVector& params,
                                          std::span<const double> context) const;

  /// Closed-form gradient of log pi(action | context).
  ParamVector grad_log_prob(const ParamVector& params, std::span<const double> context,
                            std::size_t action) const;

  /// Central-difference approximation of grad_log_prob. Test oracle.
  ParamVector finite_diff_grad(const ParamVector& params, std::span<const double> context,
                               std::size_t action, double step) const;

 private:
  void check_shapes(const ParamVector& params, std::span<const double> context) const;

  PolicySpec spec_;
};

}  // namespace gradlens
