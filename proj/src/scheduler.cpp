#include "gradlens/scheduler.hpp"

#include <cmath>
#include <numeric>

#include "gradlens/errors.hpp"
#include "gradlens/policy.hpp"

namespace gradlens {

std::string to_string(SamplerMode mode) {
  return mode == SamplerMode::uniform ? "uniform" : "grad_prop";
}

SamplerMode parse_sampler_mode(const std::string& name) {
  if (name == "uniform") return SamplerMode::uniform;
  if (name == "grad_prop") return SamplerMode::grad_prop;
  throw ConfigError("unknown sampler mode '" + name + "'");
}

std::vector<double> uniform_probs(std::size_t task_count) {
  if (task_count == 0) throw ConfigError("uniform sampling over zero tasks");
  return std::vector<double>(task_count, 1.0 / static_cast<double>(task_count));
}

std::vector<double> apply_floor(std::span<const double> probs, double floor) {
  const std::size_t m = probs.size();
  if (!(floor >= 0.0) || floor * static_cast<double>(m) > 1.0) {
    throw ConfigError("probability floor must lie in [0, 1/M]");
  }
  std::vector<double> out(probs.begin(), probs.end());
  std::vector<bool> clamped(m, false);
  for (bool changed = true; changed;) {
    changed = false;
    double free_mass = 0.0;
    std::size_t n_clamped = 0;
    for (std::size_t i = 0; i < m; ++i) {
      if (clamped[i]) {
        ++n_clamped;
      } else {
        free_mass += probs[i];
      }
    }
    const double budget = 1.0 - floor * static_cast<double>(n_clamped);
    for (std::size_t i = 0; i < m; ++i) {
      if (clamped[i]) {
        out[i] = floor;
      } else {
        out[i] = free_mass > 0.0 ? budget * probs[i] / free_mass
                                 : budget / static_cast<double>(m - n_clamped);
      }
    }
    for (std::size_t i = 0; i < m; ++i) {
      if (!clamped[i] && out[i] < floor) {
        clamped[i] = true;
        changed = true;
      }
    }
  }
  return out;
}

std::vector<double> grad_prop_probs(std::span<const double> norms, double temperature,
                                    double floor) {
  if (norms.empty()) throw ConfigError("grad_prop sampling over zero tasks");
  if (!(temperature > 0.0)) throw ConfigError("temperature must be positive");
  if (!(floor >= 0.0) || floor * static_cast<double>(norms.size()) > 1.0) {
    throw ConfigError("probability floor must lie in [0, 1/M]");
  }
  std::vector<double> scaled(norms.size());
  for (std::size_t i = 0; i < norms.size(); ++i) scaled[i] = norms[i] / temperature;
  return apply_floor(softmax(scaled), floor);
}

std::size_t sample_task(std::span<const double> probs, RngStream& rng) {
  if (probs.empty()) throw ContractViolation("sample_task over zero tasks");
  const double total = std::accumulate(probs.begin(), probs.end(), 0.0);
  if (std::abs(total - 1.0) > 1e-9) throw ContractViolation("task probabilities not normalized");
  const double u = rng.uniform();
  double acc = 0.0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    acc += probs[i];
    if (u < acc) return i;
  }
  for (std::size_t i = probs.size(); i-- > 0;) {
    if (probs[i] > 0.0) return i;
  }
  return probs.size() - 1;
}

SamplerState SamplerState::create(std::vector<std::string> task_ids, SamplerMode mode,
                                  double temperature, double floor) {
  SamplerState state;
  state.mode = mode;
  state.temperature = temperature;
  state.floor = floor;
  state.norms.assign(task_ids.size(), 0.0);
  state.task_ids = std::move(task_ids);
  if (mode == SamplerMode::grad_prop) {
    if (state.task_ids.size() < 2) throw ConfigError("grad_prop sampling needs at least two tasks");
    state.probs = grad_prop_probs(state.norms, temperature, floor);
  } else {
    state.probs = uniform_probs(state.task_ids.size());
  }
  return state;
}

SamplerState refresh(const SamplerState& state, std::span<const double> new_norms) {
  if (new_norms.size() != state.task_ids.size()) {
    throw ContractViolation("refresh needs one norm per registered task");
  }
  SamplerState next = state;
  next.norms.assign(new_norms.begin(), new_norms.end());
  if (state.mode == SamplerMode::grad_prop) {
    next.probs = grad_prop_probs(next.norms, state.temperature, state.floor);
  }
  return next;
}

}  // namespace gradlens
