#include "gradlens/io.hpp"

#include <bit>
#include <cinttypes>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

#include <openssl/evp.h>

#include "gradlens/errors.hpp"

namespace gradlens {

namespace fs = std::filesystem;

std::string format_real(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string step_record_row(const StepRecord& r) {
  std::string row;
  row += std::to_string(r.step) + ',';
  row += r.task_id + ',';
  row += format_real(r.reward_mean) + ',';
  row += format_real(r.abs_adv_mean) + ',';
  row += format_real(r.sq_norm_est) + ',';
  row += format_real(r.norm_est) + ',';
  row += format_real(r.sampler_prob) + ',';
  row += std::to_string(r.response_len) + ',';
  row += std::to_string(r.padding_len);
  return row;
}

void write_step_records(std::ostream& out, const std::vector<StepRecord>& records) {
  out << kStepRecordHeader << '\n';
  for (const auto& r : records) out << step_record_row(r) << '\n';
}

namespace {

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::stringstream ss(line);
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

double parse_real(const std::string& s, std::size_t line_no) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != s.size() || s.empty()) {
    throw ShapeError("line " + std::to_string(line_no) + ": bad number '" + s + "'");
  }
  return v;
}

std::size_t parse_count(const std::string& s, std::size_t line_no) {
  if (s.empty() || s.find_first_not_of("0123456789") != std::string::npos) {
    throw ShapeError("line " + std::to_string(line_no) + ": bad integer '" + s + "'");
  }
  return static_cast<std::size_t>(std::stoull(s));
}

}  // namespace

std::vector<StepRecord> read_step_records(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != kStepRecordHeader) {
    throw ShapeError("StepRecord CSV header mismatch");
  }
  std::vector<StepRecord> out;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto cells = split_csv(line);
    if (cells.size() != 9) {
      throw ShapeError("line " + std::to_string(line_no) + ": expected 9 columns");
    }
    StepRecord r;
    r.step = parse_count(cells[0], line_no);
    r.task_id = cells[1];
    r.reward_mean = parse_real(cells[2], line_no);
    r.abs_adv_mean = parse_real(cells[3], line_no);
    r.sq_norm_est = parse_real(cells[4], line_no);
    r.norm_est = parse_real(cells[5], line_no);
    r.sampler_prob = parse_real(cells[6], line_no);
    r.response_len = parse_count(cells[7], line_no);
    r.padding_len = parse_count(cells[8], line_no);
    out.push_back(std::move(r));
  }
  return out;
}

std::vector<StepRecord> read_step_records(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return read_step_records(in);
}

nlohmann::json step_record_json(const StepRecord& r) {
  return {{"step", r.step},
          {"task_id", r.task_id},
          {"reward_mean", r.reward_mean},
          {"abs_adv_mean", r.abs_adv_mean},
          {"sq_norm_est", r.sq_norm_est},
          {"norm_est", r.norm_est},
          {"sampler_prob", r.sampler_prob},
          {"response_len", r.response_len},
          {"padding_len", r.padding_len}};
}

void write_file_atomic(const fs::path& path, std::string_view content) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    out.flush();
    if (!out) throw std::runtime_error("write failed for " + tmp.string());
  }
  fs::rename(tmp, path);
}

std::string sha256_hex(std::string_view data) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
    throw std::runtime_error("sha256 failed");
  }
  static constexpr char hex[] = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out += hex[digest[i] >> 4];
    out += hex[digest[i] & 0xF];
  }
  return out;
}

std::string sha256_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return sha256_hex(buf.str());
}

namespace {

void put_u64_le(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out += static_cast<char>((v >> (8 * i)) & 0xFF);
}

std::uint64_t get_u64_le(std::string_view in, std::size_t pos) {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(in[pos + i])) << (8 * i);
  return v;
}

}  // namespace

std::string encode_checkpoint(const Checkpoint& ckpt) {
  nlohmann::json segs = nlohmann::json::array();
  for (const auto& s : ckpt.params.segments()) {
    segs.push_back({{"name", s.name}, {"offset", s.offset}, {"length", s.length}});
  }
  const nlohmann::json header = {{"format", "gradlens-checkpoint"},
                                 {"version", 1},
                                 {"dtype", "float64-le"},
                                 {"length", ckpt.params.size()},
                                 {"step", ckpt.step},
                                 {"segments", segs},
                                 {"extra", ckpt.extra}};
  const std::string header_text = header.dump();
  std::string out(kCheckpointMagic, sizeof(kCheckpointMagic));
  put_u64_le(out, header_text.size());
  out += header_text;
  for (double v : ckpt.params.values()) put_u64_le(out, std::bit_cast<std::uint64_t>(v));
  return out;
}

Checkpoint decode_checkpoint(std::string_view bytes) {
  if (bytes.size() < 16 || std::memcmp(bytes.data(), kCheckpointMagic, 8) != 0) {
    throw ShapeError("not a checkpoint file");
  }
  const std::uint64_t header_len = get_u64_le(bytes, 8);
  if (bytes.size() < 16 + header_len) throw ShapeError("truncated checkpoint header");
  const auto header = nlohmann::json::parse(bytes.substr(16, header_len));
  std::vector<Segment> segments;
  for (const auto& s : header.at("segments")) {
    segments.push_back(Segment{s.at("name").get<std::string>(), s.at("offset").get<std::size_t>(),
                               s.at("length").get<std::size_t>()});
  }
  const auto n = header.at("length").get<std::size_t>();
  const std::size_t data_pos = 16 + header_len;
  if (bytes.size() != data_pos + 8 * n) throw ShapeError("checkpoint payload size mismatch");
  std::vector<double> values(n);
  for (std::size_t i = 0; i < n; ++i) values[i] = std::bit_cast<double>(get_u64_le(bytes, data_pos + 8 * i));
  Checkpoint ckpt;
  ckpt.step = header.at("step").get<std::size_t>();
  ckpt.params = ParamVector(std::move(segments), std::move(values));
  ckpt.extra = header.value("extra", nlohmann::json::object());
  return ckpt;
}

void save_checkpoint(const fs::path& path, const Checkpoint& ckpt) {
  write_file_atomic(path, encode_checkpoint(ckpt));
}

Checkpoint load_checkpoint(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return decode_checkpoint(buf.str());
}

}  // namespace gradlens
