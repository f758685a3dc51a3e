#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace gradlens {

/// f(x) = 1/2 (x - x*)^T diag(eigenvalues) (x - x*), minimum value 0.
/// Smoothness constant beta is the largest eigenvalue, PL constant mu the
/// smallest.
class QuadraticProblem {
 public:
  QuadraticProblem(std::vector<double> eigenvalues, std::vector<double> optimum);

  std::size_t dim() const { return eigenvalues_.size(); }
  double mu() const { return mu_; }
  double beta() const { return beta_; }
  const std::vector<double>& eigenvalues() const { return eigenvalues_; }
  const std::vector<double>& optimum() const { return optimum_; }

  double value(std::span<const double> x) const;
  std::vector<double> grad(std::span<const double> x) const;
  double suboptimality(std::span<const double> x) const { return value(x); }

  /// ||grad f(x)||^2 / (f(x) - f*). Always in [2 mu, 2 beta].
  double ratio(std::span<const double> x) const;

 private:
  void check(std::span<const double> x) const;

  std::vector<double> eigenvalues_;
  std::vector<double> optimum_;
  double mu_ = 0.0;
  double beta_ = 0.0;
};

struct TracePoint {
  std::size_t step = 0;
  double suboptimality = 0.0;
  double sq_grad_norm = 0.0;
  double gain = 0.0;  // suboptimality(step) - suboptimality(step + 1)
};

/// `steps` iterations of x <- x - step_size * grad f(x); one point per
/// iterate before the final one. Requires 0 < step_size < 2 / beta.
std::vector<TracePoint> gd_trace(const QuadraticProblem& problem, std::vector<double> x0,
                                 double step_size, std::size_t steps);

struct CrossTaskSummary {
  std::vector<TracePoint> trace_a;
  std::vector<TracePoint> trace_b;
  double within_pearson_a = 0.0;  // Pearson(sq_grad_norm, gain) on trace a
  double within_pearson_b = 0.0;
  /// Steps where the problem with the larger squared gradient norm has the
  /// smaller gain.
  std::vector<std::size_t> crossover_steps;
};

CrossTaskSummary cross_task_demo(const QuadraticProblem& a, const QuadraticProblem& b,
                                 std::vector<double> x0_a, std::vector<double> x0_b,
                                 double step_size, std::size_t steps);

}  // namespace gradlens
