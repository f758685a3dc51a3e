#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "gradlens/metrics.hpp"
#include "gradlens/param_vector.hpp"

namespace gradlens {

inline constexpr std::string_view kStepRecordHeader =
    "step,task_id,reward_mean,abs_adv_mean,sq_norm_est,norm_est,sampler_prob,response_len,"
    "padding_len";

/// Shortest-round-trip-safe text for a double (17 significant digits).
std::string format_real(double v);

std::string step_record_row(const StepRecord& r);
void write_step_records(std::ostream& out, const std::vector<StepRecord>& records);
/// Parses a StepRecord CSV; the header must match exactly.
std::vector<StepRecord> read_step_records(std::istream& in);
std::vector<StepRecord> read_step_records(const std::filesystem::path& path);
nlohmann::json step_record_json(const StepRecord& r);

/// Writes to a sibling temp file then renames, so readers never observe a
/// partially written file.
void write_file_atomic(const std::filesystem::path& path, std::string_view content);

std::string sha256_hex(std::string_view data);
std::string sha256_file(const std::filesystem::path& path);

inline constexpr char kCheckpointMagic[8] = {'G', 'L', 'C', 'K', 'P', 'T', '0', '1'};

struct Checkpoint {
  std::size_t step = 0;
  ParamVector params;
  nlohmann::json extra;  // e.g. the policy spec
};

/// Layout: 8-byte magic, u64 LE header length, JSON header (segments, dtype,
/// length, step, extra), then length float64 little-endian values.
std::string encode_checkpoint(const Checkpoint& ckpt);
Checkpoint decode_checkpoint(std::string_view bytes);
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace gradlens
