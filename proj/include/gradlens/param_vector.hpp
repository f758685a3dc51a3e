#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace gradlens {

struct Segment {
  std::string name;
  std::size_t offset = 0;
  std::size_t length = 0;

  bool operator==(const Segment&) const = default;
};

/// Flat parameter (or gradient) vector partitioned into named segments.
///
/// Segments always tile [0, size()) contiguously. Arithmetic helpers require
/// matching layouts and throw ShapeError otherwise.
class ParamVector {
 public:
  ParamVector() = default;
  /// Zero vector with the given layout. Throws ShapeError if segments do not
  /// partition a contiguous range starting at 0.
  explicit ParamVector(std::vector<Segment> segments);
  ParamVector(std::vector<Segment> segments, std::vector<double> values);

  static ParamVector zeros_like(const ParamVector& other);

  std::size_t size() const { return values_.size(); }
  std::span<const double> values() const { return values_; }
  std::span<double> values() { return values_; }
  double operator[](std::size_t i) const { return values_[i]; }
  double& operator[](std::size_t i) { return values_[i]; }

  const std::vector<Segment>& segments() const { return segments_; }
  const Segment& segment(const std::string& name) const;
  bool has_segment(const std::string& name) const;
  std::span<const double> segment_values(const std::string& name) const;
  std::span<double> segment_values(const std::string& name);

  bool same_layout(const ParamVector& other) const;
  bool all_finite() const;

  double dot(const ParamVector& other) const;
  double squared_norm() const;
  double norm() const;

  /// this += alpha * other
  void axpy(double alpha, const ParamVector& other);
  void scale(double alpha);

  bool operator==(const ParamVector&) const = default;

 private:
  void check_layout(const ParamVector& other, const char* what) const;

  std::vector<Segment> segments_;
  std::vector<double> values_;
};

/// Layout with a single segment covering `length` entries.
std::vector<Segment> single_segment(const std::string& name, std::size_t length);

}  // namespace gradlens
