#pragma once

#include <cstddef>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "gradlens/config.hpp"
#include "gradlens/metrics.hpp"
#include "gradlens/param_vector.hpp"

namespace gradlens {

inline constexpr const char* kArtifactVersion = "0.3.0";

struct ManifestFile {
  std::string path;  // relative to the run directory
  std::string sha256;
  std::uintmax_t bytes = 0;
};

struct RunManifest {
  std::string config_hash;
  std::string artifact_version = kArtifactVersion;
  std::size_t start_step = 0;
  std::size_t end_step = 0;  // number of completed steps
  std::string status = "ok";  // "ok" or "aborted: <reason>"
  std::filesystem::path run_dir;
  std::vector<ManifestFile> files;

  bool ok() const { return status == "ok"; }
  nlohmann::json to_json() const;
};

/// Test seam: lets a caller inspect or corrupt the batch gradient of a step.
struct RunHooks {
  std::function<void(std::size_t step, ParamVector& grad)> on_batch_gradient;
};

/// Output directory for a run: the config's output_dir if set, otherwise
/// $GRADLENS_OUT/<name>, otherwise ./runs/<name>.
std::filesystem::path resolve_output_dir(const ExperimentConfig& config);

/// Executes the full training loop and writes steps.csv, gains.json,
/// correlations.json, summary.json, config.json, checkpoints/ and
/// manifest.json into the run directory. Numeric failure aborts the run with
/// the last good checkpoint kept and a manifest whose status says why.
RunManifest run(const ExperimentConfig& config, const RunHooks& hooks = {});

struct SweepPoint {
  std::string label;
  SamplerMode mode = SamplerMode::uniform;
  double temperature = kDefaultTemperature;
};

struct SweepGrid {
  std::vector<double> temperatures;
  bool include_uniform = true;

  std::vector<SweepPoint> points() const;
};

/// [grid] temperatures = 0.1, 0.01, 0.001 ; include_uniform = true
SweepGrid parse_grid(const std::string& text);
SweepGrid load_grid(const std::filesystem::path& path);

struct SweepResult {
  std::vector<RunManifest> runs;
  std::filesystem::path comparison_csv;
};

/// One run per grid point (uniform baseline first) in <out>/<label>/ with
/// seed = config.seed + point index; failed runs are recorded and skipped.
/// Writes comparison.csv (run label, one column per task id, avg).
SweepResult sweep(const ExperimentConfig& config, const SweepGrid& grid);

/// Mean reward over the last `window` sampled observations of each task.
std::vector<std::pair<std::string, double>> final_rewards(const std::vector<StepRecord>& records,
                                                          std::size_t window);

/// Recomputes every row's sampler probability from the norms logged on the
/// previous step (zeros before the first step).
std::vector<double> replay_sampler_probs(const std::vector<StepRecord>& records,
                                         const SamplerConfig& sampler);

nlohmann::json gain_report_json(const GainReport& report);
nlohmann::json correlation_report_json(const CorrelationReport& report);

}  // namespace gradlens
