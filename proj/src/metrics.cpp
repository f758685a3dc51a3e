#include "gradlens/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "gradlens/errors.hpp"

namespace gradlens {

double learning_gain(std::span<const double> rewards, std::size_t t, std::size_t s) {
  if (s == 0) throw ConfigError("gain window must be positive");
  if (t < s || t + s >= rewards.size()) {
    throw BoundsError("gain window [t-s, t+s] out of range");
  }
  double forward = 0.0;
  double backward = 0.0;
  for (std::size_t i = 1; i <= s; ++i) {
    forward += rewards[t + i];
    backward += rewards[t - i];
  }
  // differencing the sums first keeps a constant offset from leaking in
  return (forward - backward) / static_cast<double>(s);
}

std::vector<std::size_t> gain_eval_points(std::size_t series_len, std::size_t s,
                                          std::size_t num_points) {
  if (s == 0) throw ConfigError("gain window must be positive");
  if (num_points == 0) throw ConfigError("num_points must be positive");
  if (series_len < 2 * s + 1) throw BoundsError("series too short for the gain window");
  const std::size_t lo = s;
  const std::size_t hi = series_len - 1 - s;
  if (hi - lo + 1 < num_points) throw BoundsError("series too short for the requested points");
  std::vector<std::size_t> out;
  if (num_points == 1) {
    out.push_back(static_cast<std::size_t>(std::lround((lo + hi) / 2.0)));
    return out;
  }
  for (std::size_t k = 0; k < num_points; ++k) {
    const double pos = static_cast<double>(lo) + static_cast<double>(hi - lo) *
                                                     static_cast<double>(k) /
                                                     static_cast<double>(num_points - 1);
    out.push_back(static_cast<std::size_t>(std::lround(pos)));
  }
  return out;
}

std::vector<double> task_reward_series(std::span<const StepRecord> records,
                                       const std::string& task_id) {
  std::vector<double> out;
  for (const auto& r : records) {
    if (r.task_id == task_id && r.sampled()) out.push_back(r.reward_mean);
  }
  return out;
}

GainReport gain_report(std::span<const StepRecord> records, const std::string& task_id,
                       std::size_t s, std::size_t num_points) {
  const auto series = task_reward_series(records, task_id);
  GainReport report;
  report.task_id = task_id;
  report.window = s;
  report.eval_steps = gain_eval_points(series.size(), s, num_points);
  for (std::size_t t : report.eval_steps) report.gains.push_back(learning_gain(series, t, s));
  return report;
}

std::vector<double> ema_smooth(std::span<const double> series, double coeff) {
  if (!(coeff >= 0.0 && coeff < 1.0)) throw ConfigError("EMA coefficient must lie in [0, 1)");
  std::vector<double> out;
  out.reserve(series.size());
  for (double x : series) {
    out.push_back(out.empty() ? x : coeff * out.back() + (1.0 - coeff) * x);
  }
  return out;
}

double effective_lr_ratio(double sq_norm_a, double sq_norm_b) {
  if (!(sq_norm_b > 0.0)) throw DomainError("effective_lr_ratio: denominator must be positive");
  if (sq_norm_a < 0.0) throw DomainError("effective_lr_ratio: negative squared norm");
  return std::sqrt(sq_norm_a / sq_norm_b);
}

std::vector<std::pair<std::string, double>> mean_sq_norms(std::span<const StepRecord> records) {
  std::vector<std::pair<std::string, double>> sums;
  std::vector<std::size_t> counts;
  for (const auto& r : records) {
    auto it = std::find_if(sums.begin(), sums.end(), [&](const auto& p) { return p.first == r.task_id; });
    if (it == sums.end()) {
      sums.emplace_back(r.task_id, 0.0);
      counts.push_back(0);
      it = sums.end() - 1;
    }
    it->second += r.sq_norm_est;
    ++counts[static_cast<std::size_t>(it - sums.begin())];
  }
  for (std::size_t i = 0; i < sums.size(); ++i) sums[i].second /= static_cast<double>(counts[i]);
  return sums;
}

double median(std::vector<double> values) {
  if (values.empty()) throw ContractViolation("median of an empty list");
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  return n % 2 == 1 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

std::set<std::string> dominance_report(std::span<const StepRecord> records, double threshold) {
  if (!(threshold > 0.0)) throw ConfigError("dominance threshold must be positive");
  const auto means = mean_sq_norms(records);
  std::set<std::string> out;
  if (means.empty()) return out;
  std::vector<double> values;
  for (const auto& [_, v] : means) values.push_back(v);
  const double cutoff = threshold * median(values);
  for (const auto& [id, v] : means) {
    if (v > cutoff) out.insert(id);
  }
  return out;
}

std::optional<double> pearson(std::span<const double> x, std::span<const double> y,
                              std::size_t min_points) {
  if (x.size() != y.size()) throw ShapeError("correlation: length mismatch");
  const std::size_t n = x.size();
  if (n < std::max<std::size_t>(min_points, 2)) return std::nullopt;
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(n);
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / static_cast<double>(n);
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx <= 0.0 || syy <= 0.0) return std::nullopt;
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

namespace {

// average ranks, ties share the mean rank
std::vector<double> ranks(std::span<const double> v) {
  std::vector<std::size_t> order(v.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> r(v.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j + 1 < order.size() && v[order[j + 1]] == v[order[i]]) ++j;
    const double avg = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) r[order[k]] = avg;
    i = j + 1;
  }
  return r;
}

}  // namespace

std::optional<double> spearman(std::span<const double> x, std::span<const double> y,
                               std::size_t min_points) {
  if (x.size() != y.size()) throw ShapeError("correlation: length mismatch");
  if (x.size() < std::max<std::size_t>(min_points, 2)) return std::nullopt;
  const auto rx = ranks(x);
  const auto ry = ranks(y);
  return pearson(rx, ry, min_points);
}

Correlation correlate(std::span<const double> x, std::span<const double> y,
                      std::size_t min_points) {
  return Correlation{pearson(x, y, min_points), spearman(x, y, min_points), x.size()};
}

CorrelationReport correlation_report(std::span<const StepRecord> records) {
  CorrelationReport report;
  std::vector<std::string> order;
  for (const auto& r : records) {
    if (std::find(order.begin(), order.end(), r.task_id) == order.end()) order.push_back(r.task_id);
  }
  std::vector<double> mean_adv, mean_len, mean_pad, mean_norm;
  for (const auto& id : order) {
    std::vector<double> adv, len, pad, norm;
    for (const auto& r : records) {
      if (r.task_id != id || !r.sampled()) continue;
      adv.push_back(r.abs_adv_mean);
      len.push_back(static_cast<double>(r.response_len));
      pad.push_back(static_cast<double>(r.padding_len));
      norm.push_back(r.norm_est);
    }
    report.per_task.push_back(
        TaskCorrelations{id, correlate(adv, norm), correlate(len, norm), correlate(pad, norm)});
    if (adv.empty()) continue;
    auto mean = [](const std::vector<double>& v) {
      return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
    };
    mean_adv.push_back(mean(adv));
    mean_len.push_back(mean(len));
    mean_pad.push_back(mean(pad));
    mean_norm.push_back(mean(norm));
  }
  report.cross_task_adv_vs_norm = correlate(mean_adv, mean_norm, 2);
  report.cross_task_response_len_vs_norm = correlate(mean_len, mean_norm, 2);
  report.cross_task_padding_len_vs_norm = correlate(mean_pad, mean_norm, 2);
  return report;
}

}  // namespace gradlens
