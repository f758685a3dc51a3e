#pragma once

#include <cstddef>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

namespace gradlens {

/// One row of the per-step telemetry stream: one per (step, task).
struct StepRecord {
  std::size_t step = 0;
  std::string task_id;
  double reward_mean = 0.0;
  double abs_adv_mean = 0.0;
  double sq_norm_est = 0.0;
  double norm_est = 0.0;
  double sampler_prob = 0.0;
  std::size_t response_len = 0;  // 0 means the task was not sampled this step
  std::size_t padding_len = 0;

  bool sampled() const { return response_len > 0; }
};

/// Gain(t) = mean(R[t+1..t+s]) - mean(R[t-s..t-1]) on a 0-based series.
double learning_gain(std::span<const double> rewards, std::size_t t, std::size_t s);

/// `num_points` eval indices evenly spaced (rounded) over [s, n-1-s].
std::vector<std::size_t> gain_eval_points(std::size_t series_len, std::size_t s,
                                          std::size_t num_points);

struct GainReport {
  std::string task_id;
  std::vector<std::size_t> eval_steps;  // indices into the task's own reward series
  std::vector<double> gains;
  std::size_t window = 0;
};

/// Reward series of one task: reward_mean on the steps where it was sampled,
/// indexed by observation count.
std::vector<double> task_reward_series(std::span<const StepRecord> records,
                                       const std::string& task_id);

GainReport gain_report(std::span<const StepRecord> records, const std::string& task_id,
                       std::size_t s, std::size_t num_points = 3);

/// First element passes through; then coeff * prev + (1 - coeff) * x.
std::vector<double> ema_smooth(std::span<const double> series, double coeff);

/// sqrt(sq_norm_a / sq_norm_b): how much larger a's effective step size is.
double effective_lr_ratio(double sq_norm_a, double sq_norm_b);

/// Time-averaged sq_norm_est per task, in first-seen task order.
std::vector<std::pair<std::string, double>> mean_sq_norms(std::span<const StepRecord> records);

double median(std::vector<double> values);

/// Tasks whose time-averaged squared-norm EMA exceeds threshold times the
/// median task's value.
std::set<std::string> dominance_report(std::span<const StepRecord> records, double threshold);

struct Correlation {
  std::optional<double> pearson;   // empty when undefined (too few points or zero variance)
  std::optional<double> spearman;
  std::size_t n = 0;
};

/// Undefined below `min_points` pairs. Cross-task statistics use 2, since a
/// two-task mixture still has a meaningful sign.
std::optional<double> pearson(std::span<const double> x, std::span<const double> y,
                              std::size_t min_points = 3);
std::optional<double> spearman(std::span<const double> x, std::span<const double> y,
                               std::size_t min_points = 3);
Correlation correlate(std::span<const double> x, std::span<const double> y,
                      std::size_t min_points = 3);

struct TaskCorrelations {
  std::string task_id;
  Correlation adv_vs_norm;
  Correlation response_len_vs_norm;
  Correlation padding_len_vs_norm;
};

struct CorrelationReport {
  std::vector<TaskCorrelations> per_task;
  /// Computed on one (mean x, mean y) point per task.
  Correlation cross_task_adv_vs_norm;
  Correlation cross_task_response_len_vs_norm;
  Correlation cross_task_padding_len_vs_norm;
};

/// Uses only rows where the task was sampled.
CorrelationReport correlation_report(std::span<const StepRecord> records);

}  // namespace gradlens
