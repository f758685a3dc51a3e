#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "gradlens/param_vector.hpp"

namespace gradlens {

struct HalfSplit {
  std::vector<std::size_t> first;
  std::vector<std::size_t> second;
};

/// Positional split of n items into ceil(n/2) and floor(n/2).
HalfSplit split_halves(std::size_t n);

/// <g1, g2>: unbiased for ||g||^2 when g1 and g2 are independent unbiased
/// estimates of g. Can be negative.
double cross_product_sqnorm(const ParamVector& g1, const ParamVector& g2);

/// ||g_hat||^2, biased upward by tr(Cov(g_hat)). Kept for comparison only.
double naive_sqnorm(const ParamVector& g_hat);

/// sqrt(max(x, 0))
double unsquared_norm(double sq_estimate);

/// coeff * prev + (1 - coeff) * value, or `value` when there is no history.
double ema_update(std::optional<double> prev, double value, double coeff);

/// Which parameter segments the probe looks at.
struct SubsetSpec {
  enum class Kind { last, all, named };
  Kind kind = Kind::last;
  std::vector<std::string> names;

  static SubsetSpec parse(const std::string& text);
  std::string to_string() const;
  /// Segment names this spec selects for the given layout.
  std::vector<std::string> resolve(const ParamVector& layout) const;
};

/// Restriction of `grad` to the named segments, re-packed contiguously.
ParamVector subset_gradient(const ParamVector& grad, const std::vector<std::string>& subset);

struct GradNormEstimate {
  std::string task_id;
  double raw_cross = 0.0;
  double sq_norm_ema = 0.0;
  double norm = 0.0;
  std::size_t step = 0;
  std::vector<std::string> subset;
};

/// Per-task EMA of cross-product estimates. Tasks without a fresh estimate
/// keep their previous value.
class NormTracker {
 public:
  explicit NormTracker(double ema_coeff);

  const GradNormEstimate& observe(const std::string& task_id, double raw_cross, std::size_t step,
                                  const std::vector<std::string>& subset);

  bool has(const std::string& task_id) const { return estimates_.count(task_id) > 0; }
  const GradNormEstimate* find(const std::string& task_id) const;
  double coeff() const { return coeff_; }

 private:
  double coeff_;
  std::map<std::string, GradNormEstimate> estimates_;
};

}  // namespace gradlens
