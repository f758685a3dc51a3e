#include "gradlens/convex.hpp"

#include <algorithm>
#include <cmath>

#include "gradlens/errors.hpp"
#include "gradlens/metrics.hpp"

namespace gradlens {

QuadraticProblem::QuadraticProblem(std::vector<double> eigenvalues, std::vector<double> optimum)
    : eigenvalues_(std::move(eigenvalues)), optimum_(std::move(optimum)) {
  if (eigenvalues_.empty()) throw ConfigError("quadratic needs at least one eigenvalue");
  if (optimum_.size() != eigenvalues_.size()) throw ShapeError("optimum length != dim");
  for (double l : eigenvalues_) {
    if (!(l > 0.0) || !std::isfinite(l)) throw ConfigError("eigenvalues must be positive");
  }
  mu_ = *std::min_element(eigenvalues_.begin(), eigenvalues_.end());
  beta_ = *std::max_element(eigenvalues_.begin(), eigenvalues_.end());
}

void QuadraticProblem::check(std::span<const double> x) const {
  if (x.size() != dim()) throw ShapeError("point length != problem dim");
}

double QuadraticProblem::value(std::span<const double> x) const {
  check(x);
  double acc = 0.0;
  for (std::size_t i = 0; i < dim(); ++i) {
    const double d = x[i] - optimum_[i];
    acc += eigenvalues_[i] * d * d;
  }
  return 0.5 * acc;
}

std::vector<double> QuadraticProblem::grad(std::span<const double> x) const {
  check(x);
  std::vector<double> g(dim());
  for (std::size_t i = 0; i < dim(); ++i) g[i] = eigenvalues_[i] * (x[i] - optimum_[i]);
  return g;
}

double QuadraticProblem::ratio(std::span<const double> x) const {
  const double sub = value(x);
  if (!(sub > 0.0)) throw DomainError("ratio undefined at the optimum");
  double sq = 0.0;
  for (double g : grad(x)) sq += g * g;
  return sq / sub;
}

std::vector<TracePoint> gd_trace(const QuadraticProblem& problem, std::vector<double> x0,
                                 double step_size, std::size_t steps) {
  if (!(step_size > 0.0) || !(step_size < 2.0 / problem.beta())) {
    throw ConfigError("step size must lie in (0, 2/beta)");
  }
  if (x0.size() != problem.dim()) throw ShapeError("x0 length != problem dim");
  std::vector<TracePoint> trace;
  trace.reserve(steps);
  std::vector<double> x = std::move(x0);
  double sub = problem.value(x);
  for (std::size_t t = 0; t < steps; ++t) {
    const auto g = problem.grad(x);
    double sq = 0.0;
    for (double gi : g) sq += gi * gi;
    for (std::size_t i = 0; i < x.size(); ++i) x[i] -= step_size * g[i];
    const double next = problem.value(x);
    trace.push_back(TracePoint{t, sub, sq, sub - next});
    sub = next;
  }
  return trace;
}

CrossTaskSummary cross_task_demo(const QuadraticProblem& a, const QuadraticProblem& b,
                                 std::vector<double> x0_a, std::vector<double> x0_b,
                                 double step_size, std::size_t steps) {
  CrossTaskSummary out;
  out.trace_a = gd_trace(a, std::move(x0_a), step_size, steps);
  out.trace_b = gd_trace(b, std::move(x0_b), step_size, steps);
  auto within = [](const std::vector<TracePoint>& tr) {
    std::vector<double> sq, gain;
    for (const auto& p : tr) {
      sq.push_back(p.sq_grad_norm);
      gain.push_back(p.gain);
    }
    return pearson(sq, gain).value_or(0.0);
  };
  out.within_pearson_a = within(out.trace_a);
  out.within_pearson_b = within(out.trace_b);
  for (std::size_t t = 0; t < steps; ++t) {
    const auto& pa = out.trace_a[t];
    const auto& pb = out.trace_b[t];
    const bool a_bigger_grad = pa.sq_grad_norm > pb.sq_grad_norm;
    const bool b_bigger_grad = pb.sq_grad_norm > pa.sq_grad_norm;
    if ((a_bigger_grad && pa.gain < pb.gain) || (b_bigger_grad && pb.gain < pa.gain)) {
      out.crossover_steps.push_back(t);
    }
  }
  return out;
}

}  // namespace gradlens
