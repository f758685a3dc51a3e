// Acceptance gate: one PASS/FAIL line per criterion, nonzero exit on any failure.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include "gradlens/config.hpp"
#include "gradlens/convex.hpp"
#include "gradlens/grad_probe.hpp"
#include "gradlens/grpo.hpp"
#include "gradlens/harness.hpp"
#include "gradlens/io.hpp"
#include "gradlens/metrics.hpp"
#include "gradlens/policy.hpp"
#include "gradlens/scheduler.hpp"

using namespace gradlens;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool passed = false;
  std::string detail;
};

std::string fmt(const char* f, double a, double b = 0.0, double c = 0.0, double d = 0.0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c, d);
  return buf;
}

struct MeanSe {
  double mean, se;
};

MeanSe mean_se(const std::vector<double>& xs) {
  const double n = static_cast<double>(xs.size());
  const double m = std::accumulate(xs.begin(), xs.end(), 0.0) / n;
  double v = 0.0;
  for (double x : xs) v += (x - m) * (x - m);
  return {m, std::sqrt(v / (n - 1.0) / n)};
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

fs::path scratch(const std::string& tag) {
  const auto p = fs::temp_directory_path() / ("gradlens_accept_" + std::to_string(::getpid())) / tag;
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

ExperimentConfig shipped_config(const std::string& file) {
  return load_config(fs::path(GRADLENS_SOURCE_DIR) / "configs" / file);
}

// 1
Outcome estimator_unbiasedness() {
  const auto t0 = std::chrono::steady_clock::now();
  constexpr std::size_t batches = 100000, B = 8;
  RngStream rng(derive_seed(0, "acceptance/estimator"));
  const auto layout = single_segment("g", 2);
  std::vector<double> cross, naive;
  cross.reserve(batches);
  naive.reserve(batches);
  for (std::size_t b = 0; b < batches; ++b) {
    std::vector<ParamVector> draws;
    for (std::size_t i = 0; i < B; ++i) draws.emplace_back(layout, std::vector<double>{3.0 + rng.normal(), 4.0 + rng.normal()});
    const auto split = split_halves(B);
    auto mean_over = [&](const std::vector<std::size_t>& idx) {
      ParamVector m(layout);
      for (auto i : idx) m.axpy(1.0 / static_cast<double>(idx.size()), draws[i]);
      return m;
    };
    cross.push_back(cross_product_sqnorm(mean_over(split.first), mean_over(split.second)));
    std::vector<std::size_t> all(B);
    std::iota(all.begin(), all.end(), 0);
    naive.push_back(naive_sqnorm(mean_over(all)));
  }
  const auto c = mean_se(cross), n = mean_se(naive);
  const double secs = seconds_since(t0);
  const bool ok = std::abs(c.mean - 25.0) <= 3.0 * c.se && std::abs(n.mean - 25.25) <= 3.0 * n.se && secs < 10.0;
  return {ok, fmt("cross %.4f (se %.4f) vs 25, naive %.4f (se %.4f) vs 25.25", c.mean, c.se, n.mean, n.se) +
                  fmt(", %.2fs", secs)};
}

// 2
Outcome gradient_correctness() {
  const auto t0 = std::chrono::steady_clock::now();
  double worst_linear = 0.0, worst_mlp = 0.0;
  for (auto arch : {PolicyArch::linear_softmax, PolicyArch::mlp1}) {
    PolicySpec spec;
    spec.arch = arch;
    spec.init_seed = 5;
    const Policy policy(spec);
    RngStream rng(derive_seed(0, "acceptance/gradients", {static_cast<std::uint64_t>(arch)}));
    for (int k = 0; k < 100; ++k) {
      ParamVector p = policy.init_params();
      for (double& v : p.values()) v += 0.5 * rng.normal();
      std::vector<double> x(spec.context_dim);
      for (double& v : x) v = rng.normal();
      const std::size_t a = rng.index(spec.action_count);
      const auto analytic = policy.grad_log_prob(p, x, a);
      const auto fd = policy.finite_diff_grad(p, x, a, 1e-6);
      ParamVector diff = analytic;
      diff.axpy(-1.0, fd);
      const double rel = diff.norm() / std::max(fd.norm(), 1e-12);
      (arch == PolicyArch::linear_softmax ? worst_linear : worst_mlp) =
          std::max(arch == PolicyArch::linear_softmax ? worst_linear : worst_mlp, rel);
    }
  }
  const double secs = seconds_since(t0);
  return {worst_linear < 1e-5 && worst_mlp < 1e-4 && secs < 5.0,
          fmt("max rel err linear %.2e, mlp1 %.2e, %.2fs", worst_linear, worst_mlp, secs)};
}

// 3
Outcome advantage_contract() {
  double worst_mean = 0.0;
  std::size_t groups = 0, equal_groups = 0, equal_bad = 0;
  for (const char* preset : {"single_domain_analog", "multi_domain_analog"}) {
    const auto tasks = preset_tasks(preset);
    for (auto arch : {PolicyArch::linear_softmax, PolicyArch::mlp1}) {
      PolicySpec spec;
      spec.arch = arch;
      const Policy policy(spec);
      RngStream rng(derive_seed(0, "acceptance/advantages", {static_cast<std::uint64_t>(arch)}));
      for (int k = 0; k < 1500; ++k) {
        ParamVector p = policy.init_params();
        const double spread = k % 3 == 0 ? 20.0 : 1.0;  // some near-deterministic policies
        for (double& v : p.values()) v += spread * rng.normal();
        const auto& task = tasks[rng.index(tasks.size())];
        const std::size_t G = 2 + rng.index(15);
        auto g = rollout_group(policy, p, task, G, rng);
        apply_advantages(g);
        ++groups;
        const double mean = std::accumulate(g.advantages.begin(), g.advantages.end(), 0.0) / static_cast<double>(G);
        worst_mean = std::max(worst_mean, std::abs(mean));
        if (std::all_of(g.rewards.begin(), g.rewards.end(), [&](double r) { return r == g.rewards[0]; })) {
          ++equal_groups;
          if (std::any_of(g.advantages.begin(), g.advantages.end(), [](double a) { return a != 0.0; })) ++equal_bad;
        }
      }
    }
  }
  const bool ok = worst_mean <= 1e-10 && equal_groups > 0 && equal_bad == 0;
  return {ok, fmt("%.0f groups, max |mean A| %.2e, %.0f all-equal groups, %.0f nonzero", static_cast<double>(groups),
                  worst_mean, static_cast<double>(equal_groups), static_cast<double>(equal_bad))};
}

// 4
Outcome sampler_properties() {
  RngStream rng(derive_seed(0, "acceptance/sampler"));
  double worst_sum = 0.0, worst_floor = 0.0, worst_shift = 0.0, worst_uniform = 0.0;
  for (int k = 0; k < 5000; ++k) {
    const std::size_t m = 2 + rng.index(9);
    std::vector<double> norms(m);
    for (double& v : norms) v = std::exp(rng.uniform(-5.0, 3.0));
    const double eta = std::exp(rng.uniform(std::log(1e-3), std::log(10.0)));
    const auto p = grad_prop_probs(norms, eta, 0.1);
    worst_sum = std::max(worst_sum, std::abs(std::accumulate(p.begin(), p.end(), 0.0) - 1.0));
    for (double x : p) worst_floor = std::max(worst_floor, 0.1 - x);
    auto shifted = norms;
    const double c = rng.uniform(-10.0, 10.0);
    for (double& v : shifted) v += c;
    const auto ps = grad_prop_probs(shifted, eta, 0.1);
    for (std::size_t i = 0; i < m; ++i) worst_shift = std::max(worst_shift, std::abs(ps[i] - p[i]));
    std::vector<double> unit_norms(m);
    for (double& v : unit_norms) v = rng.uniform();
    const auto pu = grad_prop_probs(unit_norms, 1e6, 0.1);
    for (double x : pu) worst_uniform = std::max(worst_uniform, std::abs(x - 1.0 / static_cast<double>(m)));
  }
  const auto fixture = grad_prop_probs(std::vector<double>{10.0, 1.0, 1.0, 1.0}, 0.01, 0.1);
  const std::vector<double> want = {0.7, 0.1, 0.1, 0.1};
  double fixture_err = 0.0;
  for (std::size_t i = 0; i < 4; ++i) fixture_err = std::max(fixture_err, std::abs(fixture[i] - want[i]));
  const bool ok = worst_sum <= 1e-12 && worst_floor <= 1e-15 && worst_uniform <= 1e-6 && fixture_err <= 1e-12 &&
                  worst_shift <= 1e-9;
  return {ok, fmt("sum err %.1e, floor deficit %.1e, uniform err %.1e, fixture err %.1e", worst_sum,
                  std::max(worst_floor, 0.0), worst_uniform, fixture_err) +
                  fmt(", shift err %.1e", worst_shift)};
}

// 5
Outcome convex_ratio_bound() {
  const auto t0 = std::chrono::steady_clock::now();
  RngStream rng(derive_seed(0, "acceptance/convex"));
  std::size_t violations = 0;
  for (int p = 0; p < 100; ++p) {
    const std::size_t d = 1 + rng.index(16);
    std::vector<double> eig(d), opt(d);
    for (std::size_t i = 0; i < d; ++i) {
      eig[i] = std::exp(rng.uniform(-4.0, 5.0));
      opt[i] = rng.uniform(-2.0, 2.0);
    }
    const QuadraticProblem q(eig, opt);
    for (int k = 0; k < 1000; ++k) {
      std::vector<double> x(d);
      for (double& v : x) v = rng.uniform(-10.0, 10.0);
      const double r = q.ratio(x);
      if (r < 2.0 * q.mu() - 1e-9 || r > 2.0 * q.beta() + 1e-9) ++violations;
    }
  }
  double worst_iso = 0.0;
  for (int p = 0; p < 100; ++p) {
    const double lambda = std::exp(rng.uniform(-2.0, 2.0));
    const std::size_t d = 1 + rng.index(8);
    const QuadraticProblem q(std::vector<double>(d, lambda), std::vector<double>(d, 0.0));
    for (int k = 0; k < 10; ++k) {
      std::vector<double> x(d);
      for (double& v : x) v = rng.uniform(-5.0, 5.0);
      worst_iso = std::max(worst_iso, std::abs(q.ratio(x) - 2.0 * lambda));
    }
  }
  const double secs = seconds_since(t0);
  return {violations == 0 && worst_iso <= 1e-12 && secs < 10.0,
          fmt("%.0f violations in 100000 points, isotropic err %.1e, %.2fs", static_cast<double>(violations), worst_iso,
              secs)};
}

// 6
Outcome cross_task_breakdown() {
  const QuadraticProblem stiff({100.0}, {0.0});
  const QuadraticProblem soft({1.0}, {0.0});
  const auto demo = cross_task_demo(stiff, soft, {1.0}, {1.0}, 0.015, 40);
  std::size_t stiff_flips = 0;
  for (auto t : demo.crossover_steps) {
    const auto& a = demo.trace_a[t];
    const auto& b = demo.trace_b[t];
    if (a.sq_grad_norm > b.sq_grad_norm && a.gain < b.gain) ++stiff_flips;
  }
  const bool ok = stiff_flips > 0 && demo.within_pearson_a > 0.99 && demo.within_pearson_b > 0.99;
  return {ok, fmt("%.0f steps where stiff has larger grad and smaller gain, within r %.6f / %.6f",
                  static_cast<double>(stiff_flips), demo.within_pearson_a, demo.within_pearson_b)};
}

// 7
Outcome imbalance_reproduction() {
  const auto t0 = std::chrono::steady_clock::now();
  auto cfg = shipped_config("single_domain.ini");
  cfg.output_dir = scratch("imbalance").string();
  if (cfg.seed != 0 || cfg.train.total_steps != 100 || !cfg.tasks.preset ||
      *cfg.tasks.preset != "single_domain_analog") {
    return {false, "configs/single_domain.ini does not describe the 100-step seed-0 preset run"};
  }
  const auto m = run(cfg);
  if (!m.ok()) return {false, "run failed: " + m.status};
  const auto recs = read_step_records(m.run_dir / "steps.csv");
  const auto means = mean_sq_norms(recs);
  const auto tasks = task_registry(cfg.tasks);
  const auto high = std::max_element(tasks.begin(), tasks.end(), [](const auto& a, const auto& b) {
                      return a.feature_scale < b.feature_scale;
                    })->id;
  std::vector<double> values;
  double high_value = 0.0;
  for (const auto& [id, v] : means) {
    values.push_back(v);
    if (id == high) high_value = v;
  }
  const double med = median(values);
  const double factor = med > 0.0 ? high_value / med : INFINITY;
  const auto dominant = dominance_report(recs, 5.0);
  const double secs = seconds_since(t0);
  const bool ok = factor >= 5.0 && dominant == std::set<std::string>{high} && secs < 120.0;
  std::string names;
  for (const auto& d : dominant) names += (names.empty() ? "" : ",") + d;
  return {ok, high + fmt(" at %.2fx the median (median %.3e), ", factor, med) + "dominant {" + names + "}" +
                  fmt(", %.1fs", secs)};
}

// 8
Outcome effective_lr() {
  TrainConfig cfg;
  const ParamVector zero(single_segment("p", 3));
  const ParamVector g(single_segment("p", 3), {0.02, -0.05, 0.1});
  ParamVector big = g;
  big.scale(std::sqrt(33.0));
  const double ratio = sgd_step(zero, big, cfg).norm() / sgd_step(zero, g, cfg).norm();
  const double rounded = std::round(ratio * 1000.0) / 1000.0;
  const bool ok = big.norm() < cfg.grad_clip && std::abs(ratio - std::sqrt(33.0)) <= 1e-9 && rounded == 5.745;
  return {ok, fmt("update ratio %.12f, sqrt(33) = %.12f, rounds to %.3f", ratio, std::sqrt(33.0), rounded)};
}

// 9
Outcome determinism() {
  auto base = shipped_config("multi_domain.ini");
  base.train.total_steps = 30;
  std::vector<std::string> csvs;
  for (std::size_t workers : {1, 1, 4}) {
    auto cfg = base;
    cfg.workers = workers;
    cfg.output_dir = scratch("determinism_" + std::to_string(csvs.size())).string();
    const auto m = run(cfg);
    if (!m.ok()) return {false, "run failed: " + m.status};
    csvs.push_back(slurp(m.run_dir / "steps.csv"));
  }
  const bool ok = !csvs[0].empty() && csvs[0] == csvs[1] && csvs[0] == csvs[2];
  return {ok, fmt("3 runs (workers 1, 1, 4), %.0f bytes each, identical: ", static_cast<double>(csvs[0].size())) +
                  (ok ? "yes" : "no")};
}

// 10
Outcome gain_oracle() {
  std::vector<double> ramp(50), constant(50, 0.3);
  std::iota(ramp.begin(), ramp.end(), 0.0);
  bool ok = true;
  for (std::size_t t = 3; t + 3 < ramp.size(); ++t) {
    ok &= learning_gain(ramp, t, 3) == 4.0;
    ok &= learning_gain(constant, t, 3) == 0.0;
  }
  RngStream rng(derive_seed(0, "acceptance/gain"));
  std::size_t checked = 0;
  for (int k = 0; k < 1000; ++k) {
    const std::size_t n = 10 + rng.index(100);
    const std::size_t s = 1 + rng.index((n - 1) / 2);
    const std::size_t t = s + rng.index(n - 2 * s);
    // multiples of 1/8 keep every window sum exact
    std::vector<double> r(n), affine(n);
    for (double& v : r) v = static_cast<double>(rng.index(9)) / 8.0;
    for (std::size_t i = 0; i < n; ++i) affine[i] = 4.0 * r[i] - 0.25;
    ok &= learning_gain(affine, t, s) == 4.0 * learning_gain(r, t, s);
    std::vector<double> rev(r.rbegin(), r.rend());
    ok &= learning_gain(rev, n - 1 - t, s) == -learning_gain(r, t, s);
    ++checked;
  }
  return {ok, fmt("ramp/constant oracles plus %.0f random linearity and reversal checks", static_cast<double>(checked))};
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"1 estimator unbiasedness", estimator_unbiasedness},
      {"2 gradient correctness", gradient_correctness},
      {"3 advantage contract", advantage_contract},
      {"4 sampler properties", sampler_properties},
      {"5 convex ratio bound", convex_ratio_bound},
      {"6 cross-task breakdown", cross_task_breakdown},
      {"7 imbalance reproduction", imbalance_reproduction},
      {"8 effective learning rate", effective_lr},
      {"9 determinism", determinism},
      {"10 learning-gain oracle", gain_oracle},
  };
  int failures = 0;
  for (const auto& [name, fn] : criteria) {
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    std::printf("%s  criterion %s: %s\n", o.passed ? "PASS" : "FAIL", name.c_str(), o.detail.c_str());
    std::fflush(stdout);
    if (!o.passed) ++failures;
  }
  std::error_code ec;
  fs::remove_all(fs::temp_directory_path() / ("gradlens_accept_" + std::to_string(::getpid())), ec);
  std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failures, criteria.size());
  return failures == 0 ? 0 : 1;
}
