#include "gradlens/config.hpp"

#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "gradlens/errors.hpp"

namespace gradlens {

namespace pt = boost::property_tree;

std::string to_string(BatchAssignment a) {
  return a == BatchAssignment::per_group ? "per_group" : "per_batch";
}

BatchAssignment parse_batch_assignment(const std::string& name) {
  if (name == "per_group") return BatchAssignment::per_group;
  if (name == "per_batch") return BatchAssignment::per_batch;
  throw ConfigError("unknown batch assignment '" + name + "'");
}

void ExperimentConfig::validate() const {
  policy.validate();
  train.validate();
  if (workers == 0) throw ConfigError("workers must be positive");
  const auto task_list = task_registry(tasks);
  for (const auto& t : task_list) {
    if (t.context_dim != policy.context_dim || t.action_count != policy.action_count) {
      throw ConfigError("task '" + t.id + "' does not match the policy head dimensions");
    }
  }
  if (sampler.mode == SamplerMode::grad_prop) {
    if (task_list.size() < 2) throw ConfigError("grad_prop sampling needs at least two tasks");
    if (!(sampler.temperature > 0.0)) throw ConfigError("temperature must be positive");
  }
  if (!(sampler.floor >= 0.0) || sampler.floor * static_cast<double>(task_list.size()) > 1.0) {
    throw ConfigError("sampler floor must lie in [0, 1/M]");
  }
  if (!(probe.ema_coeff >= 0.0 && probe.ema_coeff < 1.0)) {
    throw ConfigError("probe ema_coefficient must lie in [0, 1)");
  }
  if (probe.split_rule != "positional") {
    throw ConfigError("unknown split_rule '" + probe.split_rule + "'");
  }
  probe.subset.resolve(Policy(policy).init_params());
  if (metrics.gain_window == 0) throw ConfigError("gain_window must be positive");
  if (metrics.num_points == 0) throw ConfigError("num_points must be positive");
  if (metrics.final_window == 0) throw ConfigError("final_window must be positive");
  for (double c : {metrics.norm_smoothing, metrics.reward_smoothing, metrics.length_smoothing}) {
    if (!(c >= 0.0 && c < 1.0)) throw ConfigError("smoothing coefficients must lie in [0, 1)");
  }
  if (!(metrics.dominance_threshold > 0.0)) throw ConfigError("dominance_threshold must be positive");
}

namespace {

// Reads typed keys from one INI section and remembers which were consumed so
// leftovers can be reported.
class Section {
 public:
  Section(std::string name, const pt::ptree* tree) : name_(std::move(name)), tree_(tree) {}

  template <typename T>
  void read(const std::string& key, T& out) {
    if (!tree_) return;
    auto child = tree_->get_child_optional(pt::ptree::path_type(key, '\0'));
    if (!child) return;
    used_.insert(key);
    const std::string raw = child->get_value<std::string>();
    if constexpr (std::is_same_v<T, std::string>) {
      out = raw;
    } else {
      std::istringstream in(raw);
      T value{};
      in >> value;
      if (in.fail() || !(in >> std::ws).eof()) {
        throw ConfigError("[" + name_ + "] " + key + ": cannot parse '" + raw + "'");
      }
      if constexpr (std::is_unsigned_v<T>) {
        if (raw.find('-') != std::string::npos) {
          throw ConfigError("[" + name_ + "] " + key + ": must be nonnegative");
        }
      }
      out = value;
    }
  }

  bool has(const std::string& key) const {
    return tree_ && tree_->get_child_optional(pt::ptree::path_type(key, '\0')).has_value();
  }

  void finish() const {
    if (!tree_) return;
    for (const auto& [key, _] : *tree_) {
      if (!used_.count(key)) throw ConfigError("[" + name_ + "] unknown key '" + key + "'");
    }
  }

 private:
  std::string name_;
  const pt::ptree* tree_;
  std::set<std::string> used_;
};

const pt::ptree* find_section(const pt::ptree& root, const std::string& name) {
  auto it = root.find(name);
  return it == root.not_found() ? nullptr : &it->second;
}

}  // namespace

ExperimentConfig parse_config(const std::string& text) {
  pt::ptree root;
  try {
    std::istringstream in(text);
    pt::ini_parser::read_ini(in, root);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError(std::string("config parse error: ") + e.what());
  }

  ExperimentConfig cfg;
  static const std::set<std::string> known = {"experiment", "policy", "tasks", "train",
                                              "sampler",    "probe",  "metrics"};
  for (const auto& [name, tree] : root) {
    if (tree.empty() && !tree.data().empty()) {
      throw ConfigError("key '" + name + "' must live inside a section");
    }
    if (!known.count(name) && name.rfind("task.", 0) != 0) {
      throw ConfigError("unknown config section [" + name + "]");
    }
  }

  Section experiment("experiment", find_section(root, "experiment"));
  experiment.read("name", cfg.name);
  experiment.read("seed", cfg.seed);
  experiment.read("output_dir", cfg.output_dir);
  experiment.read("workers", cfg.workers);
  experiment.read("checkpoint_every", cfg.checkpoint_every);
  experiment.finish();

  Section policy("policy", find_section(root, "policy"));
  std::string arch = to_string(cfg.policy.arch);
  policy.read("arch", arch);
  cfg.policy.arch = parse_policy_arch(arch);
  policy.read("context_dim", cfg.policy.context_dim);
  policy.read("action_count", cfg.policy.action_count);
  policy.read("hidden_dim", cfg.policy.hidden_dim);
  policy.read("init_seed", cfg.policy.init_seed);
  policy.finish();

  Section tasks("tasks", find_section(root, "tasks"));
  if (tasks.has("preset")) {
    std::string preset;
    tasks.read("preset", preset);
    cfg.tasks.preset = preset;
  }
  tasks.finish();

  for (const auto& [name, tree] : root) {
    if (name.rfind("task.", 0) != 0) continue;
    TaskSpec t;
    t.id = name.substr(5);
    t.context_dim = cfg.policy.context_dim;
    t.action_count = cfg.policy.action_count;
    Section sec(name, &tree);
    std::string family = to_string(t.family);
    sec.read("family", family);
    t.family = parse_task_family(family);
    sec.read("feature_scale", t.feature_scale);
    sec.read("difficulty", t.difficulty);
    sec.read("seed", t.seed);
    sec.read("response_len", t.response_len);
    sec.read("max_padding", t.max_padding);
    sec.finish();
    cfg.tasks.custom.push_back(std::move(t));
  }

  Section train("train", find_section(root, "train"));
  train.read("batch_size", cfg.train.batch_size);
  train.read("rollouts_per_prompt", cfg.train.group_size);
  train.read("learning_rate", cfg.train.learning_rate);
  train.read("kl_coefficient", cfg.train.kl_coeff);
  train.read("entropy_coefficient", cfg.train.entropy_coeff);
  train.read("grad_clip", cfg.train.grad_clip);
  train.read("clip_ratio", cfg.train.clip_ratio);
  train.read("total_steps", cfg.train.total_steps);
  train.finish();

  Section sampler("sampler", find_section(root, "sampler"));
  std::string mode = to_string(cfg.sampler.mode);
  std::string assignment = to_string(cfg.sampler.assignment);
  sampler.read("mode", mode);
  sampler.read("temperature", cfg.sampler.temperature);
  sampler.read("floor", cfg.sampler.floor);
  sampler.read("assignment", assignment);
  cfg.sampler.mode = parse_sampler_mode(mode);
  cfg.sampler.assignment = parse_batch_assignment(assignment);
  sampler.finish();

  Section probe("probe", find_section(root, "probe"));
  std::string subset = cfg.probe.subset.to_string();
  probe.read("ema_coefficient", cfg.probe.ema_coeff);
  probe.read("subset", subset);
  probe.read("split_rule", cfg.probe.split_rule);
  cfg.probe.subset = SubsetSpec::parse(subset);
  probe.finish();

  Section metrics("metrics", find_section(root, "metrics"));
  cfg.metrics.gain_window =
      (cfg.tasks.preset && *cfg.tasks.preset == "multi_domain_analog") ? 75 : 25;
  metrics.read("gain_window", cfg.metrics.gain_window);
  metrics.read("num_points", cfg.metrics.num_points);
  metrics.read("norm_smoothing", cfg.metrics.norm_smoothing);
  metrics.read("reward_smoothing", cfg.metrics.reward_smoothing);
  metrics.read("length_smoothing", cfg.metrics.length_smoothing);
  metrics.read("dominance_threshold", cfg.metrics.dominance_threshold);
  metrics.read("final_window", cfg.metrics.final_window);
  metrics.finish();

  return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str());
}

nlohmann::json config_to_json(const ExperimentConfig& c, bool include_runtime) {
  using nlohmann::json;
  json tasks = json::array();
  for (const auto& t : task_registry(c.tasks)) {
    tasks.push_back({{"id", t.id},
                     {"family", to_string(t.family)},
                     {"context_dim", t.context_dim},
                     {"action_count", t.action_count},
                     {"feature_scale", t.feature_scale},
                     {"difficulty", t.difficulty},
                     {"seed", t.seed},
                     {"response_len", t.response_len},
                     {"max_padding", t.max_padding}});
  }
  json j = {
      {"experiment",
       {{"name", c.name}, {"seed", c.seed}, {"checkpoint_every", c.checkpoint_every}}},
      {"policy",
       {{"arch", to_string(c.policy.arch)},
        {"context_dim", c.policy.context_dim},
        {"action_count", c.policy.action_count},
        {"hidden_dim", c.policy.hidden_dim},
        {"init_seed", c.policy.init_seed}}},
      {"tasks", {{"preset", c.tasks.preset.value_or("")}, {"resolved", tasks}}},
      {"train",
       {{"batch_size", c.train.batch_size},
        {"rollouts_per_prompt", c.train.group_size},
        {"learning_rate", c.train.learning_rate},
        {"kl_coefficient", c.train.kl_coeff},
        {"entropy_coefficient", c.train.entropy_coeff},
        {"grad_clip", c.train.grad_clip},
        {"clip_ratio", c.train.clip_ratio},
        {"total_steps", c.train.total_steps}}},
      {"sampler",
       {{"mode", to_string(c.sampler.mode)},
        {"temperature", c.sampler.temperature},
        {"floor", c.sampler.floor},
        {"assignment", to_string(c.sampler.assignment)}}},
      {"probe",
       {{"ema_coefficient", c.probe.ema_coeff},
        {"subset", c.probe.subset.to_string()},
        {"split_rule", c.probe.split_rule}}},
      {"metrics",
       {{"gain_window", c.metrics.gain_window},
        {"num_points", c.metrics.num_points},
        {"norm_smoothing", c.metrics.norm_smoothing},
        {"reward_smoothing", c.metrics.reward_smoothing},
        {"length_smoothing", c.metrics.length_smoothing},
        {"dominance_threshold", c.metrics.dominance_threshold},
        {"final_window", c.metrics.final_window}}},
  };
  if (include_runtime) {
    j["experiment"]["output_dir"] = c.output_dir;
    j["experiment"]["workers"] = c.workers;
  }
  return j;
}

}  // namespace gradlens
