#include <doctest.h>

#include <cmath>
#include <numeric>

#include "gradlens/errors.hpp"
#include "gradlens/grpo.hpp"
#include "test_util.hpp"

using namespace gradlens;
using test_util::relative_error;

namespace {

TaskSpec bandit(double scale = 1.0, double difficulty = 0.3, std::size_t response_len = 1) {
  TaskSpec t;
  t.id = "bandit";
  t.family = TaskFamily::scaled_bandit;
  t.context_dim = 4;
  t.action_count = 4;
  t.feature_scale = scale;
  t.difficulty = difficulty;
  t.response_len = response_len;
  return t;
}

PolicySpec head(PolicyArch arch = PolicyArch::linear_softmax) {
  PolicySpec s;
  s.arch = arch;
  s.context_dim = 4;
  s.action_count = 4;
  s.hidden_dim = 5;
  s.init_seed = 3;
  return s;
}

ParamVector noisy_params(const Policy& policy, std::uint64_t seed, double scale = 0.4) {
  RngStream rng(seed);
  ParamVector p = policy.init_params();
  for (double& v : p.values()) v += scale * rng.normal();
  return p;
}

std::vector<RolloutGroup> make_groups(const Policy& policy, const ParamVector& params, const TaskSpec& task,
                                      std::size_t n, std::size_t G, std::uint64_t seed) {
  std::vector<RolloutGroup> groups;
  for (std::size_t i = 0; i < n; ++i) {
    RngStream rng(seed * 1000 + i);
    groups.push_back(rollout_group(policy, params, task, G, rng));
    apply_advantages(groups.back());
  }
  return groups;
}

// central differences of the scalar surrogate
ParamVector surrogate_fd(const Policy& policy, const ParamVector& params, const std::vector<RolloutGroup>& groups,
                         const ParamVector& ref, const TrainConfig& cfg, double h = 1e-5) {
  ParamVector probe = params;
  ParamVector out = ParamVector::zeros_like(params);
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double saved = probe[i];
    probe[i] = saved + h;
    const double up = surrogate_objective(policy, probe, groups, ref, cfg);
    probe[i] = saved - h;
    const double down = surrogate_objective(policy, probe, groups, ref, cfg);
    probe[i] = saved;
    out[i] = (up - down) / (2.0 * h);
  }
  return out;
}

}  // namespace

TEST_CASE("TrainConfig defaults and validation") {
  TrainConfig cfg;
  CHECK(cfg.batch_size == 128);
  CHECK(cfg.group_size == 16);
  CHECK(cfg.learning_rate == 5e-7);
  CHECK(cfg.kl_coeff == 1e-3);
  CHECK(cfg.entropy_coeff == 1e-3);
  CHECK(cfg.grad_clip == 1.0);
  CHECK(cfg.clip_ratio == 0.2);
  CHECK(cfg.groups_per_batch() == 8);
  CHECK_NOTHROW(cfg.validate());
  cfg.batch_size = 100;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
}

TEST_CASE("group_advantages") {
  SUBCASE("one correct answer among three wrong ones") {
    // mean 0.325, population std sqrt(0.151875) = 0.389711...
    const auto a = group_advantages(std::vector<double>{1.0, 0.1, 0.1, 0.1});
    const double sd = std::sqrt(0.151875);
    CHECK(a[0] == doctest::Approx(0.675 / (sd + 1e-8)).epsilon(1e-14));
    CHECK(a[0] == doctest::Approx(1.7321).epsilon(1e-4));
    for (int i = 1; i < 4; ++i) CHECK(a[i] == doctest::Approx(-0.5774).epsilon(1e-4));
  }
  SUBCASE("(1, 0) -> (+1, -1)") {
    const auto a = group_advantages(std::vector<double>{1.0, 0.0});
    CHECK(a[0] == doctest::Approx(1.0).epsilon(1e-7));
    CHECK(a[1] == doctest::Approx(-1.0).epsilon(1e-7));
  }
  SUBCASE("all equal rewards give exact zeros") {
    for (double r : {0.0, 0.1, 1.0}) {
      const auto a = group_advantages(std::vector<double>(7, r));
      for (double v : a) CHECK(v == 0.0);
    }
  }
  SUBCASE("needs two rewards") {
    CHECK_THROWS_AS(group_advantages(std::vector<double>{1.0}), ContractViolation);
  }
  SUBCASE("mean advantage is zero on random tier groups") {
    RngStream rng(1);
    const double tiers[] = {0.0, 0.1, 1.0};
    for (int k = 0; k < 500; ++k) {
      std::vector<double> r(2 + rng.index(20));
      for (double& x : r) x = tiers[rng.index(3)];
      const auto a = group_advantages(r);
      CHECK(std::abs(std::accumulate(a.begin(), a.end(), 0.0) / a.size()) <= 1e-10);
    }
  }
}

TEST_CASE("rollout_group") {
  const Policy policy(head());
  SUBCASE("deterministic policy repeats the same action") {
    ParamVector params = policy.init_params();
    // logit_0 = 500 * x_0; force x_0 > 0 via a noiseless prototype on action 0
    auto task = bandit(1.0, 0.0);
    for (std::size_t j = 0; j < 4; ++j) params[j] = 500.0;  // w_0 = 500 on every coordinate
    RngStream rng(4);
    const auto g = rollout_group(policy, params, task, 16, rng);
    for (auto a : g.actions) CHECK(a == 0);
  }
  SUBCASE("G = 1 is rejected") {
    RngStream rng(4);
    CHECK_THROWS_AS(rollout_group(policy, policy.init_params(), bandit(), 1, rng), ContractViolation);
  }
  SUBCASE("fixed seed reproduces the group exactly") {
    RngStream r1(99), r2(99);
    const auto params = noisy_params(policy, 5);
    const auto a = rollout_group(policy, params, bandit(), 16, r1);
    const auto b = rollout_group(policy, params, bandit(), 16, r2);
    CHECK(a.actions == b.actions);
    CHECK(a.rewards == b.rewards);
    CHECK(a.log_probs == b.log_probs);
    CHECK(a.instance.context == b.instance.context);
    CHECK_FALSE(a.has_advantages);
    for (double v : a.advantages) CHECK(v == 0.0);
  }
  SUBCASE("log_probs and rewards are consistent with the policy and scorer") {
    RngStream rng(12);
    const auto params = noisy_params(policy, 6);
    const auto task = bandit(1.0, 0.2, 3);
    const auto g = rollout_group(policy, params, task, 8, rng);
    const auto lp = policy.log_probs(params, g.instance.context);
    for (std::size_t i = 0; i < g.size(); ++i) {
      double expected = 0.0;
      for (auto a : g.response(i)) expected += lp[a];
      CHECK(g.log_probs[i] == doctest::Approx(expected).epsilon(1e-14));
      CHECK(g.response(i).back() == g.actions[i]);
      CHECK(g.rewards[i] == score(task, g.instance, g.actions[i]));
    }
  }
}

TEST_CASE("batch_gradient") {
  const Policy policy(head());
  const auto params = noisy_params(policy, 21);
  const auto ref = policy.init_params();
  TrainConfig cfg;

  SUBCASE("zero advantages without regularizers give a zero gradient") {
    auto groups = make_groups(policy, params, bandit(), 3, 8, 1);
    for (auto& g : groups) std::fill(g.advantages.begin(), g.advantages.end(), 0.0);
    cfg.entropy_coeff = 0.0;
    cfg.kl_coeff = 0.0;
    CHECK(batch_gradient(policy, params, groups, ref, cfg).norm() == 0.0);
  }
  SUBCASE("KL gradient vanishes at the reference policy") {
    auto groups = make_groups(policy, params, bandit(), 3, 8, 2);
    for (auto& g : groups) std::fill(g.advantages.begin(), g.advantages.end(), 0.0);
    cfg.entropy_coeff = 0.0;
    cfg.kl_coeff = 1.0;
    CHECK(batch_gradient(policy, params, groups, params, cfg).norm() < 1e-8);
    CHECK(batch_gradient(policy, params, groups, ref, cfg).norm() > 1e-3);
  }
  SUBCASE("missing advantages are a contract violation") {
    RngStream rng(3);
    std::vector<RolloutGroup> groups = {rollout_group(policy, params, bandit(), 4, rng)};
    CHECK_THROWS_AS(batch_gradient(policy, params, groups, ref, cfg), ContractViolation);
  }
  SUBCASE("matches finite differences of the surrogate") {
    cfg.entropy_coeff = 0.05;
    cfg.kl_coeff = 0.2;
    for (auto arch : {PolicyArch::linear_softmax, PolicyArch::mlp1}) {
      const Policy pol(head(arch));
      const auto p = noisy_params(pol, 31);
      for (std::size_t L : {1, 3}) {
        const auto groups = make_groups(pol, p, bandit(1.5, 0.4, L), 1, 16, 7 + L);
        const auto single = batch_gradient(pol, p, groups, pol.init_params(), cfg);
        CHECK(relative_error(single, surrogate_fd(pol, p, groups, pol.init_params(), cfg)) < 1e-5);
        const auto many = make_groups(pol, p, bandit(1.5, 0.4, L), 5, 8, 9 + L);
        CHECK(relative_error(batch_gradient(pol, p, many, pol.init_params(), cfg),
                             surrogate_fd(pol, p, many, pol.init_params(), cfg)) < 1e-5);
      }
    }
  }
  SUBCASE("equals the average of independently computed group gradients") {
    const auto groups = make_groups(policy, params, bandit(2.0), 7, 8, 4);
    ParamVector manual = ParamVector::zeros_like(params);
    for (const auto& g : groups) {
      std::vector<RolloutGroup> one = {g};
      manual.axpy(1.0 / 7.0, batch_gradient(policy, params, one, ref, cfg));
    }
    CHECK(relative_error(batch_gradient(policy, params, groups, ref, cfg), manual) <= 1e-12);
  }
}

TEST_CASE("mixture_gradient") {
  const ParamVector g(single_segment("g", 3), {1.0, -2.0, 0.5});
  ParamVector neg = g;
  neg.scale(-1.0);
  SUBCASE("two copies") {
    std::vector<ParamVector> gs = {g, g};
    CHECK(mixture_gradient(gs) == g);
  }
  SUBCASE("cancellation") {
    std::vector<ParamVector> gs = {g, neg};
    CHECK(mixture_gradient(gs).norm() == 0.0);
  }
  SUBCASE("one dominant task") {
    // norm 100 against three unit vectors
    const ParamVector big(single_segment("g", 3), {60.0, 80.0, 0.0});
    const ParamVector e1(single_segment("g", 3), {0.0, 0.0, 1.0});
    const ParamVector e2(single_segment("g", 3), {1.0, 0.0, 0.0});
    const ParamVector e3(single_segment("g", 3), {0.0, -1.0, 0.0});
    std::vector<ParamVector> gs = {big, e1, e2, e3};
    ParamVector quarter = big;
    quarter.scale(0.25);
    CHECK(relative_error(mixture_gradient(gs), quarter) < 0.03);
  }
  SUBCASE("length mismatch") {
    std::vector<ParamVector> gs = {g, ParamVector(single_segment("g", 2))};
    CHECK_THROWS_AS(mixture_gradient(gs), ShapeError);
  }
}

TEST_CASE("sgd_step") {
  TrainConfig cfg;
  const ParamVector zero(single_segment("p", 2));
  SUBCASE("below the clip threshold the update is exactly linear") {
    const ParamVector g(single_segment("p", 2), {0.3, 0.4});
    const auto next = sgd_step(zero, g, cfg);
    CHECK(next.norm() == doctest::Approx(2.5e-7).epsilon(1e-12));
  }
  SUBCASE("clip saturation") {
    const ParamVector g(single_segment("p", 2), {6.0, 8.0});
    const auto next = sgd_step(zero, g, cfg);
    CHECK(next.norm() == doctest::Approx(cfg.learning_rate).epsilon(1e-12));
  }
  SUBCASE("scaling the gradient by sqrt(33) scales the update by sqrt(33)") {
    const ParamVector g(single_segment("p", 2), {0.03, 0.1});
    ParamVector big = g;
    big.scale(std::sqrt(33.0));
    REQUIRE(big.norm() < cfg.grad_clip);
    const double ratio = sgd_step(zero, big, cfg).norm() / sgd_step(zero, g, cfg).norm();
    CHECK(std::abs(ratio - std::sqrt(33.0)) < 1e-9);
    CHECK(std::round(ratio * 1000.0) / 1000.0 == 5.745);
  }
  SUBCASE("NaN aborts the step") {
    const ParamVector g(single_segment("p", 2), {std::nan(""), 0.0});
    CHECK_THROWS_AS(sgd_step(zero, g, cfg), NumericError);
  }
  SUBCASE("post-clip norm never exceeds the clip and linearity holds below it") {
    RngStream rng(8);
    for (int k = 0; k < 1000; ++k) {
      ParamVector g(single_segment("p", 5));
      const double s = std::exp(rng.uniform(-8.0, 8.0));
      for (double& v : g.values()) v = s * rng.normal();
      CHECK(clip_gradient(g, cfg.grad_clip).norm() <= cfg.grad_clip + 1e-12);
      if (g.norm() < 0.1) {
        const ParamVector origin(single_segment("p", 5));
        ParamVector scaled = g;
        scaled.scale(7.0);
        const double r = sgd_step(origin, scaled, cfg).norm() / sgd_step(origin, g, cfg).norm();
        CHECK(std::abs(r - 7.0) <= 7.0 * 1e-12);
      }
    }
  }
}
