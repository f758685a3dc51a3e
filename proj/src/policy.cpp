#include "gradlens/policy.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "gradlens/errors.hpp"
#include "gradlens/rng.hpp"

namespace gradlens {

std::string to_string(PolicyArch arch) {
  switch (arch) {
    case PolicyArch::linear_softmax:
      return "linear_softmax";
    case PolicyArch::mlp1:
      return "mlp1";
  }
  return "unknown";
}

PolicyArch parse_policy_arch(const std::string& name) {
  if (name == "linear_softmax") return PolicyArch::linear_softmax;
  if (name == "mlp1") return PolicyArch::mlp1;
  throw ConfigError("unknown policy arch '" + name + "'");
}

void PolicySpec::validate() const {
  if (context_dim == 0) throw ConfigError("policy context_dim must be positive");
  if (action_count < 2) throw ConfigError("policy action_count must be at least 2");
  if (arch == PolicyArch::mlp1 && hidden_dim == 0) {
    throw ConfigError("mlp1 hidden_dim must be positive");
  }
}

std::size_t PolicySpec::param_count() const {
  if (arch == PolicyArch::linear_softmax) return action_count * context_dim;
  return hidden_dim * (context_dim + 1) + action_count * (hidden_dim + 1);
}

std::vector<Segment> PolicySpec::layout() const {
  if (arch == PolicyArch::linear_softmax) return single_segment("logits", param_count());
  const std::size_t hidden = hidden_dim * (context_dim + 1);
  return {Segment{"hidden", 0, hidden},
          Segment{"output", hidden, action_count * (hidden_dim + 1)}};
}

std::vector<double> log_softmax(std::span<const double> logits) {
  const double peak = *std::max_element(logits.begin(), logits.end());
  double acc = 0.0;
  for (double l : logits) acc += std::exp(l - peak);
  const double lse = peak + std::log(acc);
  std::vector<double> out(logits.size());
  for (std::size_t i = 0; i < logits.size(); ++i) out[i] = logits[i] - lse;
  return out;
}

std::vector<double> softmax(std::span<const double> logits) {
  auto out = log_softmax(logits);
  for (double& v : out) v = std::exp(v);
  return out;
}

Policy::Policy(PolicySpec spec) : spec_(spec) { spec_.validate(); }

ParamVector Policy::init_params() const {
  ParamVector params(spec_.layout());
  if (spec_.arch == PolicyArch::linear_softmax) return params;

  RngStream rng(derive_seed(spec_.init_seed, "policy/init"));
  const std::size_t d = spec_.context_dim;
  const std::size_t h = spec_.hidden_dim;
  const double hidden_bound = 1.0 / std::sqrt(static_cast<double>(d));
  const double output_bound = 1.0 / std::sqrt(static_cast<double>(h));
  for (double& v : params.segment_values("hidden")) v = rng.uniform(-hidden_bound, hidden_bound);
  for (double& v : params.segment_values("output")) v = rng.uniform(-output_bound, output_bound);
  return params;
}

void Policy::check_shapes(const ParamVector& params, std::span<const double> context) const {
  if (context.size() != spec_.context_dim) {
    throw ShapeError("context length " + std::to_string(context.size()) + " != context_dim " +
                     std::to_string(spec_.context_dim));
  }
  if (params.size() != spec_.param_count()) {
    throw ShapeError("parameter count does not match policy spec");
  }
}

namespace {

struct HiddenActivations {
  std::vector<double> h;
};

HiddenActivations mlp_hidden(const PolicySpec& spec, std::span<const double> hidden,
                             std::span<const double> x) {
  const std::size_t d = spec.context_dim;
  const std::size_t H = spec.hidden_dim;
  HiddenActivations act{std::vector<double>(H)};
  for (std::size_t k = 0; k < H; ++k) {
    double z = hidden[H * d + k];
    for (std::size_t j = 0; j < d; ++j) z += hidden[k * d + j] * x[j];
    act.h[k] = std::tanh(z);
  }
  return act;
}

}  // namespace

std::vector<double> Policy::logits(const ParamVector& params,
                                   std::span<const double> context) const {
  check_shapes(params, context);
  const std::size_t d = spec_.context_dim;
  const std::size_t K = spec_.action_count;
  std::vector<double> out(K, 0.0);
  if (spec_.arch == PolicyArch::linear_softmax) {
    const auto w = params.values();
    for (std::size_t a = 0; a < K; ++a) {
      double acc = 0.0;
      for (std::size_t j = 0; j < d; ++j) acc += w[a * d + j] * context[j];
      out[a] = acc;
    }
    return out;
  }
  const std::size_t H = spec_.hidden_dim;
  const auto act = mlp_hidden(spec_, params.segment_values("hidden"), context);
  const auto w2 = params.segment_values("output");
  for (std::size_t a = 0; a < K; ++a) {
    double acc = w2[K * H + a];
    for (std::size_t k = 0; k < H; ++k) acc += w2[a * H + k] * act.h[k];
    out[a] = acc;
  }
  return out;
}

std::vector<double> Policy::log_probs(const ParamVector& params,
                                      std::span<const double> context) const {
  return log_softmax(logits(params, context));
}

std::vector<double> Policy::action_distribution(const ParamVector& params,
                                                std::span<const double> context) const {
  return softmax(logits(params, context));
}

ParamVector Policy::grad_log_prob(const ParamVector& params, std::span<const double> context,
                                  std::size_t action) const {
  const std::size_t K = spec_.action_count;
  if (action >= K) throw ContractViolation("action index out of range");
  const auto probs = action_distribution(params, context);
  // d log pi(a) / d logit_b
  std::vector<double> delta(K);
  for (std::size_t b = 0; b < K; ++b) delta[b] = (b == action ? 1.0 : 0.0) - probs[b];

  ParamVector grad = ParamVector::zeros_like(params);
  const std::size_t d = spec_.context_dim;
  if (spec_.arch == PolicyArch::linear_softmax) {
    auto g = grad.values();
    for (std::size_t b = 0; b < K; ++b) {
      for (std::size_t j = 0; j < d; ++j) g[b * d + j] = delta[b] * context[j];
    }
    return grad;
  }

  const std::size_t H = spec_.hidden_dim;
  const auto act = mlp_hidden(spec_, params.segment_values("hidden"), context);
  const auto w2 = params.segment_values("output");
  auto g_out = grad.segment_values("output");
  for (std::size_t b = 0; b < K; ++b) {
    for (std::size_t k = 0; k < H; ++k) g_out[b * H + k] = delta[b] * act.h[k];
    g_out[K * H + b] = delta[b];
  }
  auto g_hid = grad.segment_values("hidden");
  for (std::size_t k = 0; k < H; ++k) {
    double dh = 0.0;
    for (std::size_t b = 0; b < K; ++b) dh += delta[b] * w2[b * H + k];
    const double dz = dh * (1.0 - act.h[k] * act.h[k]);
    for (std::size_t j = 0; j < d; ++j) g_hid[k * d + j] = dz * context[j];
    g_hid[H * d + k] = dz;
  }
  return grad;
}

ParamVector Policy::finite_diff_grad(const ParamVector& params, std::span<const double> context,
                                     std::size_t action, double step) const {
  if (!(step > 0.0)) throw ContractViolation("finite-difference step must be positive");
  if (action >= spec_.action_count) throw ContractViolation("action index out of range");
  ParamVector probe = params;
  ParamVector grad = ParamVector::zeros_like(params);
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double saved = probe[i];
    probe[i] = saved + step;
    const double up = log_probs(probe, context)[action];
    probe[i] = saved - step;
    const double down = log_probs(probe, context)[action];
    probe[i] = saved;
    grad[i] = (up - down) / (2.0 * step);
  }
  return grad;
}

}  // namespace gradlens
