#include "gradlens/task_suite.hpp"

#include <algorithm>
#include <cmath>

#include "gradlens/errors.hpp"

namespace gradlens {

std::string to_string(TaskFamily family) {
  switch (family) {
    case TaskFamily::scaled_bandit:
      return "scaled_bandit";
    case TaskFamily::parity:
      return "parity";
    case TaskFamily::modular_add:
      return "modular_add";
    case TaskFamily::noisy_channel:
      return "noisy_channel";
  }
  return "unknown";
}

TaskFamily parse_task_family(const std::string& name) {
  if (name == "scaled_bandit") return TaskFamily::scaled_bandit;
  if (name == "parity") return TaskFamily::parity;
  if (name == "modular_add") return TaskFamily::modular_add;
  if (name == "noisy_channel") return TaskFamily::noisy_channel;
  throw ConfigError("unknown task family '" + name + "'");
}

void TaskSpec::validate() const {
  const std::string who = "task '" + id + "': ";
  if (id.empty()) throw ConfigError("task id must be nonempty");
  if (context_dim == 0) throw ConfigError(who + "context_dim must be positive");
  if (action_count < 2) throw ConfigError(who + "action_count must be at least 2");
  if (!(feature_scale > 0.0) || !std::isfinite(feature_scale)) {
    throw ConfigError(who + "feature_scale must be positive");
  }
  if (!(difficulty >= 0.0 && difficulty <= 1.0)) {
    throw ConfigError(who + "difficulty must lie in [0, 1]");
  }
  if (response_len == 0) throw ConfigError(who + "response_len must be positive");
  const std::size_t w = well_formed_count();
  switch (family) {
    case TaskFamily::scaled_bandit:
    case TaskFamily::noisy_channel:
      if (context_dim < w) throw ConfigError(who + "context_dim must be >= action_count - 1");
      break;
    case TaskFamily::modular_add:
      if (context_dim < 2 * w) {
        throw ConfigError(who + "modular_add needs context_dim >= 2 * (action_count - 1)");
      }
      break;
    case TaskFamily::parity:
      if (w < 2) throw ConfigError(who + "parity needs at least two well-formed actions");
      break;
  }
}

namespace {

std::size_t parity_bits(const TaskSpec& task) {
  const std::size_t max_bits = std::min<std::size_t>(task.context_dim, 4);
  return 1 + static_cast<std::size_t>(std::lround(task.difficulty * static_cast<double>(max_bits - 1)));
}

std::size_t argmax(const std::vector<double>& v, std::size_t begin, std::size_t end) {
  std::size_t best = begin;
  for (std::size_t i = begin + 1; i < end; ++i) {
    if (v[i] > v[best]) best = i;
  }
  return best - begin;
}

}  // namespace

Instance sample_instance(const TaskSpec& task, RngStream& rng) {
  const std::size_t d = task.context_dim;
  const std::size_t w = task.well_formed_count();
  Instance inst;
  inst.context.assign(d, 0.0);
  inst.format_trap = true;

  switch (task.family) {
    case TaskFamily::scaled_bandit: {
      // prototype e_c blurred by isotropic noise of scale `difficulty`
      inst.correct_action = rng.index(w);
      inst.context[inst.correct_action] = 1.0;
      for (double& x : inst.context) x += task.difficulty * rng.normal();
      break;
    }
    case TaskFamily::noisy_channel: {
      // +/-1 code word for c in the first w slots, each slot flipped with
      // probability difficulty / 2; remaining slots are random distractors
      inst.correct_action = rng.index(w);
      for (std::size_t j = 0; j < d; ++j) {
        if (j < w) {
          const double bit = (j == inst.correct_action) ? 1.0 : -1.0;
          inst.context[j] = rng.bernoulli(0.5 * task.difficulty) ? -bit : bit;
        } else {
          inst.context[j] = rng.bernoulli(0.5) ? 1.0 : -1.0;
        }
      }
      break;
    }
    case TaskFamily::parity: {
      for (double& x : inst.context) x = rng.bernoulli(0.5) ? 1.0 : -1.0;
      std::size_t ones = 0;
      for (std::size_t j = 0; j < parity_bits(task); ++j) ones += inst.context[j] > 0.0 ? 1 : 0;
      inst.correct_action = ones % 2;
      break;
    }
    case TaskFamily::modular_add: {
      const std::size_t a = rng.index(w);
      const std::size_t b = rng.index(w);
      inst.context[a] = 1.0;
      inst.context[w + b] = 1.0;
      inst.correct_action = (a + b) % w;
      if (rng.bernoulli(task.difficulty)) inst.correct_action = rng.index(w);
      break;
    }
  }
  if (task.max_padding > 0) inst.padding_len = rng.index(task.max_padding + 1);
  for (double& x : inst.context) x *= task.feature_scale;
  return inst;
}

RngStream instance_stream(std::uint64_t experiment_seed, const TaskSpec& task,
                          std::uint64_t instance_index) {
  return RngStream(derive_seed(experiment_seed, "task/" + task.id, {task.seed, instance_index}));
}

std::size_t derive_label(const TaskSpec& task, const std::vector<double>& context) {
  const std::size_t w = task.well_formed_count();
  switch (task.family) {
    case TaskFamily::scaled_bandit:
    case TaskFamily::noisy_channel:
      return argmax(context, 0, w);
    case TaskFamily::parity: {
      std::size_t ones = 0;
      for (std::size_t j = 0; j < parity_bits(task); ++j) ones += context[j] > 0.0 ? 1 : 0;
      return ones % 2;
    }
    case TaskFamily::modular_add:
      return (argmax(context, 0, w) + argmax(context, w, 2 * w)) % w;
  }
  return 0;
}

double score(const TaskSpec& task, const Instance& instance, std::size_t action) {
  if (action >= task.action_count) throw ContractViolation("action index out of range");
  if (instance.format_trap && action == task.malformed_action()) return kRewardMalformed;
  return action == instance.correct_action ? kRewardCorrect : kRewardWrongAnswer;
}

std::vector<TaskSpec> preset_tasks(const std::string& name) {
  auto make = [](std::string id, TaskFamily family, double scale, double difficulty,
                 std::uint64_t seed, std::size_t response_len, std::size_t padding) {
    TaskSpec t;
    t.id = std::move(id);
    t.family = family;
    t.context_dim = 8;
    t.action_count = 5;
    t.feature_scale = scale;
    t.difficulty = difficulty;
    t.seed = seed;
    t.response_len = response_len;
    t.max_padding = padding;
    return t;
  };
  if (name == "multi_domain_analog") {
    return {make("code", TaskFamily::noisy_channel, 3.0, 0.4, 1, 4, 6),
            make("countdown", TaskFamily::modular_add, 1.0, 0.3, 2, 3, 2),
            make("math", TaskFamily::scaled_bandit, 1.0, 0.6, 3, 2, 4),
            make("finqa", TaskFamily::parity, 2.0, 0.0, 4, 2, 12)};
  }
  if (name == "single_domain_analog") {
    // hardest to easiest; the easy task also carries the large feature scale
    return {make("deepscaler", TaskFamily::scaled_bandit, 1.0, 0.9, 1, 1, 4),
            make("math", TaskFamily::scaled_bandit, 1.0, 0.6, 2, 1, 3),
            make("arithmetic", TaskFamily::scaled_bandit, 4.0, 0.2, 3, 1, 1)};
  }
  throw ConfigError("unknown task preset '" + name + "'");
}

std::vector<TaskSpec> task_registry(const TaskListConfig& config) {
  std::vector<TaskSpec> declared;
  if (config.preset) declared = preset_tasks(*config.preset);
  declared.insert(declared.end(), config.custom.begin(), config.custom.end());
  if (declared.empty()) throw ConfigError("task list is empty");

  std::vector<TaskSpec> out;
  for (const auto& t : declared) {
    t.validate();
    const bool seen = std::any_of(out.begin(), out.end(),
                                  [&](const TaskSpec& o) { return o.id == t.id; });
    if (seen) throw ConfigError("duplicate task id '" + t.id + "'");
    out.push_back(t);
  }
  for (const auto& t : out) {
    if (t.context_dim != out.front().context_dim || t.action_count != out.front().action_count) {
      throw ConfigError("all tasks must share context_dim and action_count");
    }
  }
  return out;
}

}  // namespace gradlens
