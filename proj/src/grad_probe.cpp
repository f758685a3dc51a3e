#include "gradlens/grad_probe.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "gradlens/errors.hpp"

namespace gradlens {

HalfSplit split_halves(std::size_t n) {
  if (n < 2) throw ContractViolation("split_halves needs at least two groups");
  HalfSplit split;
  const std::size_t first = (n + 1) / 2;
  for (std::size_t i = 0; i < n; ++i) (i < first ? split.first : split.second).push_back(i);
  return split;
}

double cross_product_sqnorm(const ParamVector& g1, const ParamVector& g2) {
  if (g1.size() != g2.size()) throw ShapeError("cross product: length mismatch");
  return g1.dot(g2);
}

double naive_sqnorm(const ParamVector& g_hat) { return g_hat.squared_norm(); }

double unsquared_norm(double sq_estimate) { return std::sqrt(std::max(sq_estimate, 0.0)); }

double ema_update(std::optional<double> prev, double value, double coeff) {
  if (!(coeff >= 0.0 && coeff < 1.0)) throw ConfigError("EMA coefficient must lie in [0, 1)");
  if (!prev) return value;
  return coeff * *prev + (1.0 - coeff) * value;
}

SubsetSpec SubsetSpec::parse(const std::string& text) {
  SubsetSpec spec;
  if (text.empty() || text == "last") return spec;
  if (text == "all") {
    spec.kind = Kind::all;
    return spec;
  }
  spec.kind = Kind::named;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item.erase(0, item.find_first_not_of(" \t"));
    item.erase(item.find_last_not_of(" \t") + 1);
    if (!item.empty()) spec.names.push_back(item);
  }
  if (spec.names.empty()) throw ConfigError("empty probe subset");
  return spec;
}

std::string SubsetSpec::to_string() const {
  switch (kind) {
    case Kind::last:
      return "last";
    case Kind::all:
      return "all";
    case Kind::named:
      break;
  }
  std::string out;
  for (const auto& n : names) out += (out.empty() ? "" : ",") + n;
  return out;
}

std::vector<std::string> SubsetSpec::resolve(const ParamVector& layout) const {
  std::vector<std::string> out;
  switch (kind) {
    case Kind::last:
      if (layout.segments().empty()) throw ConfigError("parameter vector has no segments");
      out.push_back(layout.segments().back().name);
      break;
    case Kind::all:
      for (const auto& s : layout.segments()) out.push_back(s.name);
      break;
    case Kind::named:
      for (const auto& n : names) {
        if (!layout.has_segment(n)) throw ConfigError("unknown segment '" + n + "'");
      }
      out = names;
      break;
  }
  return out;
}

ParamVector subset_gradient(const ParamVector& grad, const std::vector<std::string>& subset) {
  std::vector<Segment> layout;
  std::vector<double> values;
  for (const auto& name : subset) {
    const auto src = grad.segment_values(name);  // throws ConfigError if unknown
    layout.push_back(Segment{name, values.size(), src.size()});
    values.insert(values.end(), src.begin(), src.end());
  }
  return ParamVector(std::move(layout), std::move(values));
}

NormTracker::NormTracker(double ema_coeff) : coeff_(ema_coeff) {
  if (!(coeff_ >= 0.0 && coeff_ < 1.0)) throw ConfigError("EMA coefficient must lie in [0, 1)");
}

const GradNormEstimate& NormTracker::observe(const std::string& task_id, double raw_cross,
                                             std::size_t step,
                                             const std::vector<std::string>& subset) {
  if (!std::isfinite(raw_cross)) throw NumericError("non-finite norm estimate for " + task_id);
  auto it = estimates_.find(task_id);
  std::optional<double> prev;
  if (it != estimates_.end()) prev = it->second.sq_norm_ema;
  GradNormEstimate est;
  est.task_id = task_id;
  est.raw_cross = raw_cross;
  est.sq_norm_ema = ema_update(prev, raw_cross, coeff_);
  est.norm = unsquared_norm(est.sq_norm_ema);
  est.step = step;
  est.subset = subset;
  return estimates_[task_id] = std::move(est);
}

const GradNormEstimate* NormTracker::find(const std::string& task_id) const {
  auto it = estimates_.find(task_id);
  return it == estimates_.end() ? nullptr : &it->second;
}

}  // namespace gradlens
