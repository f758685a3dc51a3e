#include "gradlens/validation.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "gradlens/convex.hpp"
#include "gradlens/errors.hpp"
#include "gradlens/grad_probe.hpp"
#include "gradlens/policy.hpp"
#include "gradlens/rng.hpp"
#include "gradlens/scheduler.hpp"

namespace gradlens {

using nlohmann::json;

bool ValidationReport::passed() const {
  return std::all_of(checks.begin(), checks.end(), [](const CheckResult& c) { return c.passed; });
}

json ValidationReport::to_json() const {
  json out = {{"suite", suite}, {"passed", passed()}, {"checks", json::array()}};
  for (const auto& c : checks) {
    out["checks"].push_back({{"name", c.name}, {"passed", c.passed}, {"measured", c.measured}});
  }
  return out;
}

const std::vector<std::string>& validation_suites() {
  static const std::vector<std::string> suites = {"estimator", "convex", "gradients", "sampler"};
  return suites;
}

namespace {

struct MeanSe {
  double mean = 0.0;
  double se = 0.0;
};

MeanSe mean_se(const std::vector<double>& xs) {
  const double n = static_cast<double>(xs.size());
  const double mean = std::accumulate(xs.begin(), xs.end(), 0.0) / n;
  double var = 0.0;
  for (double x : xs) var += (x - mean) * (x - mean);
  var /= (n - 1.0);
  return {mean, std::sqrt(var / n)};
}

ValidationReport estimator_suite() {
  // X ~ N((3, 4), I); B = 8 per batch; two halves of 4
  constexpr std::size_t kBatches = 100000;
  constexpr std::size_t kBatch = 8;
  const std::vector<double> mean = {3.0, 4.0};
  RngStream rng(derive_seed(20240601, "validate/estimator"));
  const auto layout = single_segment("g", 2);
  std::vector<double> cross, naive, gap;
  cross.reserve(kBatches);
  naive.reserve(kBatches);
  for (std::size_t b = 0; b < kBatches; ++b) {
    ParamVector h1(layout), h2(layout), full(layout);
    for (std::size_t i = 0; i < kBatch; ++i) {
      ParamVector x(layout, {mean[0] + rng.normal(), mean[1] + rng.normal()});
      (i < kBatch / 2 ? h1 : h2).axpy(2.0 / kBatch, x);
      full.axpy(1.0 / kBatch, x);
    }
    cross.push_back(cross_product_sqnorm(h1, h2));
    naive.push_back(naive_sqnorm(full));
    gap.push_back(naive.back() - cross.back());
  }
  const auto c = mean_se(cross);
  const auto n = mean_se(naive);
  const auto g = mean_se(gap);
  ValidationReport report{"estimator", {}};
  report.checks.push_back({"cross_product_unbiased",
                           std::abs(c.mean - 25.0) <= 3.0 * c.se,
                           {{"mean", c.mean}, {"standard_error", c.se}, {"target", 25.0}}});
  report.checks.push_back({"naive_biased_by_trace_over_batch",
                           std::abs(n.mean - 25.25) <= 3.0 * n.se,
                           {{"mean", n.mean}, {"standard_error", n.se}, {"target", 25.25}}});
  report.checks.push_back({"measured_naive_bias",
                           std::abs(g.mean - 0.25) <= 3.0 * g.se,
                           {{"bias", g.mean}, {"standard_error", g.se}, {"target", 0.25}}});
  report.checks.push_back({"negative_estimates_truncated",
                           unsquared_norm(-0.5) == 0.0 && unsquared_norm(25.0) == 5.0,
                           {{"sqrt_trunc(-0.5)", unsquared_norm(-0.5)}}});
  return report;
}

ValidationReport convex_suite() {
  RngStream rng(derive_seed(20240601, "validate/convex"));
  std::size_t violations = 0;
  std::size_t points = 0;
  double worst_low = 0.0, worst_high = 0.0;
  for (std::size_t p = 0; p < 100; ++p) {
    const std::size_t dim = 1 + rng.index(6);
    std::vector<double> eig(dim), opt(dim);
    for (auto& e : eig) e = std::exp(rng.uniform(-3.0, 3.0));
    for (auto& o : opt) o = rng.normal();
    const QuadraticProblem q(eig, opt);
    for (std::size_t k = 0; k < 1000; ++k) {
      std::vector<double> x(dim);
      for (std::size_t i = 0; i < dim; ++i) x[i] = opt[i] + rng.normal() * 3.0;
      if (!(q.value(x) > 0.0)) continue;
      const double r = q.ratio(x);
      ++points;
      worst_low = std::min(worst_low, r - 2.0 * q.mu());
      worst_high = std::max(worst_high, r - 2.0 * q.beta());
      if (r < 2.0 * q.mu() - 1e-9 || r > 2.0 * q.beta() + 1e-9) ++violations;
    }
  }
  double iso_err = 0.0;
  for (std::size_t k = 0; k < 100; ++k) {
    const double lambda = std::exp(rng.uniform(-2.0, 2.0));
    const QuadraticProblem q({lambda, lambda, lambda}, {0.0, 0.0, 0.0});
    std::vector<double> x = {rng.normal() + 0.1, rng.normal(), rng.normal()};
    iso_err = std::max(iso_err, std::abs(q.ratio(x) - 2.0 * lambda) / (2.0 * lambda));
  }
  ValidationReport report{"convex", {}};
  report.checks.push_back({"ratio_within_2mu_2beta",
                           violations == 0,
                           {{"points", points},
                            {"violations", violations},
                            {"min_ratio_minus_2mu", worst_low},
                            {"max_ratio_minus_2beta", worst_high}}});
  report.checks.push_back({"isotropic_ratio_tight", iso_err <= 1e-12, {{"max_relative_error", iso_err}}});

  const auto trace = gd_trace(QuadraticProblem({1.0}, {0.0}), {1.0}, 0.5, 10);
  double halving_err = 0.0;
  for (std::size_t t = 0; t + 1 < trace.size(); ++t) {
    halving_err = std::max(halving_err, std::abs(trace[t + 1].suboptimality / trace[t].suboptimality - 0.25));
  }
  report.checks.push_back({"gd_contraction_1d", halving_err <= 1e-15, {{"max_error", halving_err}}});
  return report;
}

double relative_error(const ParamVector& a, const ParamVector& b) {
  ParamVector diff = a;
  diff.axpy(-1.0, b);
  return diff.norm() / std::max(b.norm(), 1e-300);
}

ValidationReport gradients_suite() {
  ValidationReport report{"gradients", {}};
  RngStream rng(derive_seed(20240601, "validate/gradients"));
  for (auto arch : {PolicyArch::linear_softmax, PolicyArch::mlp1}) {
    PolicySpec spec;
    spec.arch = arch;
    spec.context_dim = 5;
    spec.action_count = 4;
    spec.hidden_dim = 6;
    const Policy policy(spec);
    const double tol = arch == PolicyArch::linear_softmax ? 1e-5 : 1e-4;
    double worst = 0.0, worst_score = 0.0;
    for (std::size_t k = 0; k < 100; ++k) {
      ParamVector params(spec.layout());
      for (double& v : params.values()) v = rng.normal() * 0.5;
      std::vector<double> ctx(spec.context_dim);
      for (double& c : ctx) c = rng.normal();
      const std::size_t action = rng.index(spec.action_count);
      worst = std::max(worst, relative_error(policy.grad_log_prob(params, ctx, action),
                                             policy.finite_diff_grad(params, ctx, action, 1e-5)));
      const auto probs = policy.action_distribution(params, ctx);
      ParamVector expected = ParamVector::zeros_like(params);
      for (std::size_t a = 0; a < spec.action_count; ++a) {
        expected.axpy(probs[a], policy.grad_log_prob(params, ctx, a));
      }
      worst_score = std::max(worst_score, expected.norm());
    }
    const std::string tag = to_string(arch);
    report.checks.push_back({tag + "_matches_finite_differences", worst < tol,
                             {{"max_relative_error", worst}, {"tolerance", tol}}});
    report.checks.push_back({tag + "_expected_score_zero", worst_score <= 1e-10,
                             {{"max_norm", worst_score}}});
  }
  std::vector<double> logits = {0.3, -1.2, 2.5, 0.0};
  auto shifted = logits;
  for (double& l : shifted) l += 123.0;
  const auto p1 = softmax(logits);
  const auto p2 = softmax(shifted);
  double shift_err = 0.0;
  for (std::size_t i = 0; i < p1.size(); ++i) shift_err = std::max(shift_err, std::abs(p1[i] - p2[i]));
  report.checks.push_back({"softmax_shift_invariant", shift_err <= 1e-12, {{"max_abs_error", shift_err}}});
  return report;
}

ValidationReport sampler_suite() {
  ValidationReport report{"sampler", {}};
  RngStream rng(derive_seed(20240601, "validate/sampler"));
  double worst_sum = 0.0, worst_floor = 0.0, worst_shift = 0.0, worst_idem = 0.0;
  for (std::size_t k = 0; k < 1000; ++k) {
    const std::size_t m = 2 + rng.index(7);
    std::vector<double> norms(m);
    for (double& n : norms) n = std::exp(rng.uniform(-4.0, 2.0));
    const double eta = std::exp(rng.uniform(std::log(1e-3), std::log(1.0)));
    const double floor = std::min(0.1, 1.0 / static_cast<double>(m));
    const auto p = grad_prop_probs(norms, eta, floor);
    worst_sum = std::max(worst_sum, std::abs(std::accumulate(p.begin(), p.end(), 0.0) - 1.0));
    for (double v : p) worst_floor = std::max(worst_floor, floor - v);
    auto moved = norms;
    for (double& n : moved) n += 0.37;
    const auto q = grad_prop_probs(moved, eta, floor);
    const auto again = apply_floor(p, floor);
    for (std::size_t i = 0; i < m; ++i) {
      worst_shift = std::max(worst_shift, std::abs(p[i] - q[i]));
      worst_idem = std::max(worst_idem, std::abs(p[i] - again[i]));
    }
  }
  report.checks.push_back({"sums_to_one", worst_sum <= 1e-12, {{"max_abs_error", worst_sum}}});
  report.checks.push_back({"respects_floor", worst_floor <= 1e-12, {{"max_shortfall", worst_floor}}});
  report.checks.push_back({"shift_invariant", worst_shift <= 1e-12, {{"max_abs_error", worst_shift}}});
  report.checks.push_back({"floor_idempotent", worst_idem <= 1e-15, {{"max_abs_error", worst_idem}}});

  const std::vector<double> bounded = {3.0, 0.5, 1.7, 0.0};
  const auto hot = grad_prop_probs(bounded, 1e6, 0.1);
  double uniform_err = 0.0;
  for (double v : hot) uniform_err = std::max(uniform_err, std::abs(v - 0.25));
  report.checks.push_back({"uniform_at_high_temperature", uniform_err <= 1e-6, {{"max_abs_error", uniform_err}}});

  const auto fixture = grad_prop_probs(std::vector<double>{10.0, 1.0, 1.0, 1.0}, 0.01, 0.1);
  const std::vector<double> expected = {0.7, 0.1, 0.1, 0.1};
  double fixture_err = 0.0;
  for (std::size_t i = 0; i < 4; ++i) fixture_err = std::max(fixture_err, std::abs(fixture[i] - expected[i]));
  report.checks.push_back({"floor_fixture_0.7_0.1_0.1_0.1", fixture_err <= 1e-12,
                           {{"probs", fixture}, {"max_abs_error", fixture_err}}});
  return report;
}

}  // namespace

ValidationReport validate_suite(const std::string& suite) {
  if (suite == "estimator") return estimator_suite();
  if (suite == "convex") return convex_suite();
  if (suite == "gradients") return gradients_suite();
  if (suite == "sampler") return sampler_suite();
  throw UsageError("unknown validation suite '" + suite + "'");
}

}  // namespace gradlens
