#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "gradlens/rng.hpp"

namespace gradlens {

enum class SamplerMode { uniform, grad_prop };
std::string to_string(SamplerMode mode);
SamplerMode parse_sampler_mode(const std::string& name);

inline constexpr double kDefaultTemperature = 0.01;
inline constexpr double kDefaultFloor = 0.1;

std::vector<double> uniform_probs(std::size_t task_count);

/// Raises every entry below `floor` to exactly `floor` and rescales the
/// free entries to carry the remaining mass, repeating until no free entry
/// falls below the floor.
std::vector<double> apply_floor(std::span<const double> probs, double floor);

/// softmax(norms / temperature) computed in log space, then floored.
std::vector<double> grad_prop_probs(std::span<const double> norms, double temperature,
                                    double floor);

/// Categorical draw. Throws ContractViolation unless probs sum to 1 within 1e-9.
std::size_t sample_task(std::span<const double> probs, RngStream& rng);

struct SamplerState {
  std::vector<std::string> task_ids;
  SamplerMode mode = SamplerMode::uniform;
  double temperature = kDefaultTemperature;
  double floor = kDefaultFloor;
  std::vector<double> norms;
  std::vector<double> probs;

  static SamplerState create(std::vector<std::string> task_ids, SamplerMode mode,
                             double temperature, double floor);
};

/// Recomputes probabilities from fresh per-task norms (one per task id, in
/// task order). Uniform mode records the norms but ignores them.
SamplerState refresh(const SamplerState& state, std::span<const double> new_norms);

}  // namespace gradlens
