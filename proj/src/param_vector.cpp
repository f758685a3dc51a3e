#include "gradlens/param_vector.hpp"

#include <algorithm>
#include <cmath>

#include "gradlens/errors.hpp"

namespace gradlens {

namespace {

std::size_t validated_length(const std::vector<Segment>& segments) {
  std::size_t expected = 0;
  for (const auto& seg : segments) {
    if (seg.offset != expected) {
      throw ShapeError("segment '" + seg.name + "' leaves a gap or overlaps its predecessor");
    }
    expected += seg.length;
  }
  for (std::size_t i = 0; i < segments.size(); ++i) {
    for (std::size_t j = i + 1; j < segments.size(); ++j) {
      if (segments[i].name == segments[j].name) {
        throw ShapeError("duplicate segment name '" + segments[i].name + "'");
      }
    }
  }
  return expected;
}

}  // namespace

ParamVector::ParamVector(std::vector<Segment> segments)
    : segments_(std::move(segments)), values_(validated_length(segments_), 0.0) {}

ParamVector::ParamVector(std::vector<Segment> segments, std::vector<double> values)
    : segments_(std::move(segments)), values_(std::move(values)) {
  if (validated_length(segments_) != values_.size()) {
    throw ShapeError("segment layout does not match value count");
  }
}

ParamVector ParamVector::zeros_like(const ParamVector& other) {
  return ParamVector(other.segments_);
}

const Segment& ParamVector::segment(const std::string& name) const {
  auto it = std::find_if(segments_.begin(), segments_.end(),
                         [&](const Segment& s) { return s.name == name; });
  if (it == segments_.end()) throw ConfigError("unknown segment '" + name + "'");
  return *it;
}

bool ParamVector::has_segment(const std::string& name) const {
  return std::any_of(segments_.begin(), segments_.end(),
                     [&](const Segment& s) { return s.name == name; });
}

std::span<const double> ParamVector::segment_values(const std::string& name) const {
  const auto& seg = segment(name);
  return std::span<const double>(values_).subspan(seg.offset, seg.length);
}

std::span<double> ParamVector::segment_values(const std::string& name) {
  const auto& seg = segment(name);
  return std::span<double>(values_).subspan(seg.offset, seg.length);
}

bool ParamVector::same_layout(const ParamVector& other) const {
  return segments_ == other.segments_;
}

bool ParamVector::all_finite() const {
  return std::all_of(values_.begin(), values_.end(), [](double v) { return std::isfinite(v); });
}

void ParamVector::check_layout(const ParamVector& other, const char* what) const {
  if (values_.size() != other.values_.size()) {
    throw ShapeError(std::string(what) + ": length mismatch");
  }
}

double ParamVector::dot(const ParamVector& other) const {
  check_layout(other, "dot");
  double acc = 0.0;
  for (std::size_t i = 0; i < values_.size(); ++i) acc += values_[i] * other.values_[i];
  return acc;
}

double ParamVector::squared_norm() const {
  double acc = 0.0;
  for (double v : values_) acc += v * v;
  return acc;
}

double ParamVector::norm() const { return std::sqrt(squared_norm()); }

void ParamVector::axpy(double alpha, const ParamVector& other) {
  check_layout(other, "axpy");
  for (std::size_t i = 0; i < values_.size(); ++i) values_[i] += alpha * other.values_[i];
}

void ParamVector::scale(double alpha) {
  for (double& v : values_) v *= alpha;
}

std::vector<Segment> single_segment(const std::string& name, std::size_t length) {
  return {Segment{name, 0, length}};
}

}  // namespace gradlens
