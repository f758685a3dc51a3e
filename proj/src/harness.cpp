#include "gradlens/harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <fstream>
#include <numeric>
#include <sstream>
#include <thread>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "gradlens/errors.hpp"
#include "gradlens/grad_probe.hpp"
#include "gradlens/grpo.hpp"
#include "gradlens/io.hpp"
#include "gradlens/policy.hpp"
#include "gradlens/rng.hpp"
#include "gradlens/scheduler.hpp"
#include "gradlens/task_suite.hpp"

namespace gradlens {

namespace fs = std::filesystem;
using nlohmann::json;

json RunManifest::to_json() const {
  json files_json = json::array();
  for (const auto& f : files) {
    files_json.push_back({{"path", f.path}, {"sha256", f.sha256}, {"bytes", f.bytes}});
  }
  return {{"config_hash", config_hash},
          {"artifact_version", artifact_version},
          {"start_step", start_step},
          {"end_step", end_step},
          {"status", status},
          {"files", files_json}};
}

fs::path resolve_output_dir(const ExperimentConfig& config) {
  if (!config.output_dir.empty()) return config.output_dir;
  if (const char* root = std::getenv("GRADLENS_OUT"); root && *root) {
    return fs::path(root) / config.name;
  }
  return fs::path("runs") / config.name;
}

json gain_report_json(const GainReport& report) {
  return {{"task_id", report.task_id},
          {"window", report.window},
          {"eval_steps", report.eval_steps},
          {"gains", report.gains}};
}

namespace {

json optional_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

json correlation_json(const Correlation& c) {
  return {{"pearson", optional_json(c.pearson)},
          {"spearman", optional_json(c.spearman)},
          {"n", c.n},
          {"defined", c.pearson.has_value()}};
}

}  // namespace

json correlation_report_json(const CorrelationReport& report) {
  json per_task = json::array();
  for (const auto& t : report.per_task) {
    per_task.push_back({{"task_id", t.task_id},
                        {"abs_adv_vs_norm", correlation_json(t.adv_vs_norm)},
                        {"response_len_vs_norm", correlation_json(t.response_len_vs_norm)},
                        {"padding_len_vs_norm", correlation_json(t.padding_len_vs_norm)}});
  }
  return {{"per_task", per_task},
          {"cross_task",
           {{"abs_adv_vs_norm", correlation_json(report.cross_task_adv_vs_norm)},
            {"response_len_vs_norm", correlation_json(report.cross_task_response_len_vs_norm)},
            {"padding_len_vs_norm", correlation_json(report.cross_task_padding_len_vs_norm)}}}};
}

std::vector<std::pair<std::string, double>> final_rewards(const std::vector<StepRecord>& records,
                                                          std::size_t window) {
  std::vector<std::string> order;
  for (const auto& r : records) {
    if (std::find(order.begin(), order.end(), r.task_id) == order.end()) order.push_back(r.task_id);
  }
  std::vector<std::pair<std::string, double>> out;
  for (const auto& id : order) {
    const auto series = task_reward_series(records, id);
    if (series.empty()) {
      out.emplace_back(id, std::nan(""));
      continue;
    }
    const std::size_t n = std::min(window, series.size());
    const double sum = std::accumulate(series.end() - static_cast<std::ptrdiff_t>(n), series.end(), 0.0);
    out.emplace_back(id, sum / static_cast<double>(n));
  }
  return out;
}

std::vector<double> replay_sampler_probs(const std::vector<StepRecord>& records,
                                         const SamplerConfig& sampler) {
  std::vector<std::string> ids;
  for (const auto& r : records) {
    if (r.step != records.front().step) break;
    ids.push_back(r.task_id);
  }
  const std::size_t m = ids.size();
  if (m == 0 || records.size() % m != 0) throw ShapeError("records are not one row per task per step");
  std::vector<double> prev_norms(m, 0.0);
  std::vector<double> out;
  out.reserve(records.size());
  for (std::size_t base = 0; base < records.size(); base += m) {
    const auto probs = sampler.mode == SamplerMode::grad_prop
                           ? grad_prop_probs(prev_norms, sampler.temperature, sampler.floor)
                           : uniform_probs(m);
    for (std::size_t i = 0; i < m; ++i) {
      if (records[base + i].task_id != ids[i]) throw ShapeError("task order changes between steps");
      out.push_back(probs[i]);
      prev_norms[i] = records[base + i].norm_est;
    }
  }
  return out;
}

namespace {

// Runs fn(i) for i in [0, n) on up to `workers` threads. Each index is
// handled by exactly one thread; the first exception is rethrown.
template <typename Fn>
void parallel_for(std::size_t n, std::size_t workers, Fn&& fn) {
  workers = std::max<std::size_t>(1, std::min(workers, n));
  if (workers == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::exception_ptr> errors(workers);
  {
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        try {
          for (std::size_t i = w; i < n; i += workers) fn(i);
        } catch (...) {
          errors[w] = std::current_exception();
        }
      });
    }
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

ParamVector mean_of(const std::vector<ParamVector>& grads, const std::vector<std::size_t>& idx) {
  std::vector<ParamVector> picked;
  picked.reserve(idx.size());
  for (std::size_t i : idx) picked.push_back(grads[i]);
  ParamVector out = pairwise_sum(picked);
  out.scale(1.0 / static_cast<double>(idx.size()));
  return out;
}

class RunWriter {
 public:
  explicit RunWriter(fs::path dir) : dir_(std::move(dir)) {}

  const fs::path& dir() const { return dir_; }

  void write(const std::string& rel, std::string_view content) {
    write_file_atomic(dir_ / rel, content);
    track(rel);
  }

  void track(const std::string& rel) {
    if (std::find(files_.begin(), files_.end(), rel) == files_.end()) files_.push_back(rel);
  }

  void finish(RunManifest& manifest) const {
    manifest.files.clear();
    for (const auto& rel : files_) {
      const fs::path p = dir_ / rel;
      if (!fs::exists(p)) continue;
      manifest.files.push_back(ManifestFile{rel, sha256_file(p), fs::file_size(p)});
    }
    write_file_atomic(dir_ / "manifest.json", manifest.to_json().dump(2) + "\n");
  }

 private:
  fs::path dir_;
  std::vector<std::string> files_;
};

// fewest digits that still parse back to the same double
std::string short_real(double v) {
  char buf[64];
  for (int prec = 1; prec <= 17; ++prec) {
    std::snprintf(buf, sizeof buf, "%.*g", prec, v);
    if (std::strtod(buf, nullptr) == v) break;
  }
  return buf;
}

std::string checkpoint_name(std::size_t completed_steps) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "checkpoints/step_%06zu.ckpt", completed_steps);
  return buf;
}

json summary_json(const ExperimentConfig& config, const std::vector<StepRecord>& records) {
  json out = json::object();
  const auto means = mean_sq_norms(records);
  std::vector<double> values;
  for (const auto& [_, v] : means) values.push_back(v);
  const double med = values.empty() ? 0.0 : median(values);
  json tasks = json::array();
  for (const auto& [id, v] : means) {
    json t = {{"task_id", id}, {"mean_sq_norm_est", v}};
    if (med > 0.0) {
      t["ratio_to_median"] = v / med;
      t["effective_lr_ratio_to_median"] = v >= 0.0 ? json(effective_lr_ratio(v, med)) : json(nullptr);
    }
    tasks.push_back(t);
  }
  out["median_mean_sq_norm_est"] = med;
  out["tasks"] = tasks;
  const auto dominant = records.empty() ? std::set<std::string>{}
                                        : dominance_report(records, config.metrics.dominance_threshold);
  out["dominance_threshold"] = config.metrics.dominance_threshold;
  out["dominant_tasks"] = std::vector<std::string>(dominant.begin(), dominant.end());
  json finals = json::object();
  for (const auto& [id, v] : final_rewards(records, config.metrics.final_window)) {
    finals[id] = std::isfinite(v) ? json(v) : json(nullptr);
  }
  out["final_rewards"] = finals;
  return out;
}

}  // namespace

RunManifest run(const ExperimentConfig& config, const RunHooks& hooks) {
  config.validate();
  const auto tasks = task_registry(config.tasks);
  const std::size_t m = tasks.size();
  const Policy policy(config.policy);
  ParamVector params = policy.init_params();
  const ParamVector ref_params = params;
  const auto subset = config.probe.subset.resolve(params);
  const std::size_t n_groups = config.train.groups_per_batch();
  const std::size_t G = config.train.group_size;

  RunManifest manifest;
  manifest.config_hash = sha256_hex(config_to_json(config, false).dump());
  manifest.run_dir = resolve_output_dir(config);
  RunWriter writer(manifest.run_dir);

  std::ofstream csv;
  std::size_t completed = 0;
  auto abort_with = [&](const std::string& reason) {
    manifest.status = "aborted: " + reason;
    manifest.end_step = completed;
    if (csv.is_open()) csv.close();
    try {
      save_checkpoint(manifest.run_dir / checkpoint_name(completed),
                      Checkpoint{completed, params, config_to_json(config)["policy"]});
      writer.track(checkpoint_name(completed));
    } catch (const std::exception&) {
      // leave whatever checkpoints already exist
    }
    try {
      writer.finish(manifest);
    } catch (const std::exception&) {
    }
    return manifest;
  };

  try {
    fs::create_directories(manifest.run_dir / "checkpoints");
    writer.write("config.json", config_to_json(config).dump(2) + "\n");
    csv.open(manifest.run_dir / "steps.csv", std::ios::trunc);
    if (!csv) throw std::runtime_error("cannot open steps.csv");
    csv << kStepRecordHeader << '\n';
    csv.flush();
    writer.track("steps.csv");
  } catch (const std::exception& e) {
    return abort_with(std::string("io: ") + e.what());
  }

  std::vector<std::string> ids;
  for (const auto& t : tasks) ids.push_back(t.id);
  SamplerState sampler =
      SamplerState::create(ids, config.sampler.mode, config.sampler.temperature, config.sampler.floor);
  NormTracker tracker(config.probe.ema_coeff);
  std::vector<std::uint64_t> instances_drawn(m, 0);
  std::vector<StepRecord> records;
  records.reserve(config.train.total_steps * m);

  for (std::size_t step = 0; step < config.train.total_steps; ++step) {
    std::vector<double> norms(m, 0.0);
    for (std::size_t i = 0; i < m; ++i) {
      if (const auto* est = tracker.find(ids[i])) norms[i] = est->norm;
    }
    sampler = refresh(sampler, norms);

    RngStream sampler_rng(derive_seed(config.seed, "sampler", {step}));
    std::vector<std::size_t> group_task(n_groups);
    if (config.sampler.assignment == BatchAssignment::per_batch) {
      std::fill(group_task.begin(), group_task.end(), sample_task(sampler.probs, sampler_rng));
    } else {
      for (auto& t : group_task) t = sample_task(sampler.probs, sampler_rng);
    }
    std::vector<std::uint64_t> instance_index(n_groups);
    for (std::size_t g = 0; g < n_groups; ++g) instance_index[g] = instances_drawn[group_task[g]]++;

    std::vector<RolloutGroup> groups(n_groups);
    std::vector<ParamVector> grads(n_groups);
    try {
      parallel_for(n_groups, config.workers, [&](std::size_t g) {
        const TaskSpec& task = tasks[group_task[g]];
        RngStream task_rng = instance_stream(config.seed, task, instance_index[g]);
        RngStream action_rng(derive_seed(config.seed, "rollout", {step, g}));
        groups[g] = rollout_group(policy, params, task, G, task_rng, action_rng);
        apply_advantages(groups[g]);
        grads[g] = group_gradient(policy, params, groups[g], ref_params, config.train);
      });

      for (std::size_t i = 0; i < m; ++i) {
        std::vector<std::size_t> mine;
        for (std::size_t g = 0; g < n_groups; ++g) {
          if (group_task[g] == i) mine.push_back(g);
        }
        if (mine.size() < 2) continue;
        const auto split = split_halves(mine.size());
        std::vector<std::size_t> first, second;
        for (std::size_t k : split.first) first.push_back(mine[k]);
        for (std::size_t k : split.second) second.push_back(mine[k]);
        const double cross = cross_product_sqnorm(subset_gradient(mean_of(grads, first), subset),
                                                  subset_gradient(mean_of(grads, second), subset));
        tracker.observe(ids[i], cross, step, subset);
      }

      ParamVector batch = pairwise_sum(grads);
      batch.scale(1.0 / static_cast<double>(n_groups));
      if (hooks.on_batch_gradient) hooks.on_batch_gradient(step, batch);
      params = sgd_step(params, batch, config.train);
    } catch (const NumericError& e) {
      return abort_with(std::string("numeric: ") + e.what());
    }

    std::vector<StepRecord> rows(m);
    for (std::size_t i = 0; i < m; ++i) {
      StepRecord& r = rows[i];
      r.step = step;
      r.task_id = ids[i];
      r.sampler_prob = sampler.probs[i];
      if (const auto* est = tracker.find(ids[i])) {
        r.sq_norm_est = est->sq_norm_ema;
        r.norm_est = est->norm;
      }
      double reward = 0.0, abs_adv = 0.0, padding = 0.0;
      std::size_t rollouts = 0, sampled_groups = 0;
      for (std::size_t g = 0; g < n_groups; ++g) {
        if (group_task[g] != i) continue;
        ++sampled_groups;
        padding += static_cast<double>(groups[g].instance.padding_len);
        for (std::size_t k = 0; k < groups[g].size(); ++k) {
          reward += groups[g].rewards[k];
          abs_adv += std::abs(groups[g].advantages[k]);
          ++rollouts;
        }
      }
      if (rollouts > 0) {
        r.reward_mean = reward / static_cast<double>(rollouts);
        r.abs_adv_mean = abs_adv / static_cast<double>(rollouts);
        r.response_len = tasks[i].response_len;
        r.padding_len = static_cast<std::size_t>(std::lround(padding / static_cast<double>(sampled_groups)));
      }
    }

    try {
      for (const auto& r : rows) csv << step_record_row(r) << '\n';
      csv.flush();
      if (!csv) throw std::runtime_error("write failed for steps.csv");
      records.insert(records.end(), rows.begin(), rows.end());
      completed = step + 1;
      const bool periodic = config.checkpoint_every > 0 && completed % config.checkpoint_every == 0;
      if (periodic || completed == config.train.total_steps) {
        save_checkpoint(manifest.run_dir / checkpoint_name(completed),
                        Checkpoint{completed, params, config_to_json(config)["policy"]});
        writer.track(checkpoint_name(completed));
      }
    } catch (const std::exception& e) {
      return abort_with(std::string("io: ") + e.what());
    }
  }
  csv.close();
  manifest.end_step = completed;

  try {
    json gains = json::array();
    for (const auto& id : ids) {
      try {
        gains.push_back(gain_report_json(
            gain_report(records, id, config.metrics.gain_window, config.metrics.num_points)));
      } catch (const BoundsError& e) {
        gains.push_back({{"task_id", id}, {"window", config.metrics.gain_window}, {"error", e.what()}});
      }
    }
    writer.write("gains.json", gains.dump(2) + "\n");
    writer.write("correlations.json", correlation_report_json(correlation_report(records)).dump(2) + "\n");
    writer.write("summary.json", summary_json(config, records).dump(2) + "\n");
    writer.finish(manifest);
  } catch (const std::exception& e) {
    return abort_with(std::string("io: ") + e.what());
  }
  return manifest;
}

std::vector<SweepPoint> SweepGrid::points() const {
  std::vector<SweepPoint> out;
  if (include_uniform) out.push_back(SweepPoint{"uniform", SamplerMode::uniform, kDefaultTemperature});
  for (double t : temperatures) {
    out.push_back(SweepPoint{"grad_prop_eta_" + short_real(t), SamplerMode::grad_prop, t});
  }
  return out;
}

SweepGrid parse_grid(const std::string& text) {
  namespace pt = boost::property_tree;
  pt::ptree root;
  try {
    std::istringstream in(text);
    pt::ini_parser::read_ini(in, root);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError(std::string("grid parse error: ") + e.what());
  }
  SweepGrid grid;
  for (const auto& [name, tree] : root) {
    if (name != "grid") throw ConfigError("unknown grid section [" + name + "]");
    for (const auto& [key, node] : tree) {
      const std::string value = node.get_value<std::string>();
      if (key == "temperatures") {
        std::stringstream ss(value);
        std::string item;
        while (std::getline(ss, item, ',')) {
          std::size_t used = 0;
          double t = 0.0;
          try {
            t = std::stod(item, &used);
          } catch (const std::exception&) {
            throw ConfigError("bad temperature '" + item + "'");
          }
          if (item.find_first_not_of(" \t", used) != std::string::npos || !(t > 0.0)) {
            throw ConfigError("bad temperature '" + item + "'");
          }
          grid.temperatures.push_back(t);
        }
      } else if (key == "include_uniform") {
        if (value != "true" && value != "false") throw ConfigError("include_uniform must be true/false");
        grid.include_uniform = value == "true";
      } else {
        throw ConfigError("[grid] unknown key '" + key + "'");
      }
    }
  }
  if (grid.points().empty()) throw ConfigError("sweep grid is empty");
  return grid;
}

SweepGrid load_grid(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open grid file " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_grid(buf.str());
}

SweepResult sweep(const ExperimentConfig& config, const SweepGrid& grid) {
  const auto points = grid.points();
  if (points.empty()) throw ConfigError("sweep grid is empty");
  const auto tasks = task_registry(config.tasks);
  const fs::path root = resolve_output_dir(config);
  fs::create_directories(root);

  SweepResult result;
  std::string table = "run";
  for (const auto& t : tasks) table += "," + t.id;
  table += ",avg\n";

  json runs = json::array();
  for (std::size_t i = 0; i < points.size(); ++i) {
    const auto& point = points[i];
    ExperimentConfig sub = config;
    sub.seed = config.seed + i;
    sub.sampler.mode = point.mode;
    sub.sampler.temperature = point.temperature;
    sub.output_dir = (root / point.label).string();
    sub.name = config.name + "/" + point.label;

    RunManifest manifest;
    try {
      manifest = run(sub);
    } catch (const std::exception& e) {
      manifest.status = std::string("aborted: ") + e.what();
      manifest.run_dir = sub.output_dir;
    }
    runs.push_back({{"label", point.label}, {"seed", sub.seed}, {"status", manifest.status},
                    {"run_dir", point.label}});

    table += point.label;
    if (manifest.ok()) {
      const auto finals = final_rewards(read_step_records(manifest.run_dir / "steps.csv"),
                                        config.metrics.final_window);
      double sum = 0.0;
      for (const auto& [_, v] : finals) {
        table += "," + format_real(v);
        sum += v;
      }
      table += "," + format_real(sum / static_cast<double>(finals.size())) + "\n";
    } else {
      for (std::size_t k = 0; k <= tasks.size(); ++k) table += ",nan";
      table += "\n";
    }
    result.runs.push_back(std::move(manifest));
  }
  result.comparison_csv = root / "comparison.csv";
  write_file_atomic(result.comparison_csv, table);
  write_file_atomic(root / "sweep.json", json{{"runs", runs}}.dump(2) + "\n");
  return result;
}

}  // namespace gradlens
