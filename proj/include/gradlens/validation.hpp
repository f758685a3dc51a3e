#pragma once

#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace gradlens {

struct CheckResult {
  std::string name;
  bool passed = false;
  nlohmann::json measured;
};

struct ValidationReport {
  std::string suite;
  std::vector<CheckResult> checks;

  bool passed() const;
  nlohmann::json to_json() const;
};

/// Suites: "estimator", "convex", "gradients", "sampler". Throws UsageError
/// for anything else.
ValidationReport validate_suite(const std::string& suite);

const std::vector<std::string>& validation_suites();

}  // namespace gradlens
