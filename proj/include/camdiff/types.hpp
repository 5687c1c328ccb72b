// Domain types shared by every camdiff module.

#pragma once

#include <compare>
#include <cstddef>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace camdiff {

/// Content error: an input violates a documented invariant.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Structural parse failure of a manifest, config or other document.
class ParseError : public Error {
 public:
  using Error::Error;
};

inline constexpr double kCamTolerance = 1e-6;
inline constexpr double kProbabilitySumTolerance = 1e-5;

/// One H x W activation map with every value in [0, 1], stored row-major.
///
/// Only validate_cam() constructs a Cam, so the range invariant holds for
/// every instance.
class Cam {
 public:
  std::size_t height() const noexcept { return height_; }
  std::size_t width() const noexcept { return width_; }
  std::size_t size() const noexcept { return values_.size(); }
  std::span<const double> values() const noexcept { return values_; }
  double operator[](std::size_t j) const noexcept { return values_[j]; }
  double at(std::size_t row, std::size_t col) const { return values_.at(row * width_ + col); }

  bool same_shape(const Cam& other) const noexcept {
    return height_ == other.height_ && width_ == other.width_;
  }

  friend bool operator==(const Cam&, const Cam&) = default;

 private:
  Cam(std::size_t height, std::size_t width, std::vector<double> values)
      : height_(height), width_(width), values_(std::move(values)) {}

  friend Cam validate_cam(std::size_t, std::size_t, std::span<const double>);

  std::size_t height_ = 0;
  std::size_t width_ = 0;
  std::vector<double> values_;
};

/// Checks shape and range; values within kCamTolerance outside [0, 1] are
/// clamped, anything further out (or non-finite) is rejected.
Cam validate_cam(std::size_t height, std::size_t width, std::span<const double> raw);
inline Cam validate_cam(const Cam& cam) {
  return validate_cam(cam.height(), cam.width(), cam.values());
}

/// Baseline (no augmentation, no seed) or augmented model (both present).
struct ModelId {
  std::optional<std::string> augmentation;
  std::optional<std::string> seed;

  static ModelId baseline() { return {}; }
  static ModelId augmented(std::string augmentation, std::string seed);

  bool is_baseline() const noexcept { return !augmentation.has_value(); }
  /// "baseline" or "<augmentation>/<seed>".
  std::string label() const;

  friend auto operator<=>(const ModelId&, const ModelId&) = default;
};

struct PredictionRecord {
  std::string image_id;
  std::vector<double> probabilities;
  std::size_t predicted_class = 0;
};

/// Index of the largest probability; ties go to the lowest class index.
std::size_t argmax_class(std::span<const double> probabilities);

/// Verifies length, range, sum-to-one and argmax consistency. When
/// `predicted_class` is absent it is derived. The probability vector is never
/// altered.
PredictionRecord validate_prediction(std::string image_id, std::vector<double> probabilities,
                                     std::optional<std::size_t> predicted_class,
                                     std::size_t class_count);

struct GroundTruthTable {
  std::unordered_map<std::string, std::size_t> labels;

  std::optional<std::size_t> label_of(const std::string& image_id) const;
};

enum class MetricKind { mad, msd, pearson, spearman, overlap_rate, class_kld };

std::string_view to_string(MetricKind kind);

/// A metric plus its parameter (Y percent for overlap_rate, epsilon for
/// class_kld).
class MetricId {
 public:
  MetricId() = default;  // mad
  static MetricId make(MetricKind kind, std::optional<double> parameter = std::nullopt);
  /// Parses "mad", "overlap_rate@20", "class_kld@1e-10", ...
  static MetricId parse(std::string_view text);

  MetricKind kind() const noexcept { return kind_; }
  std::optional<double> parameter() const noexcept { return parameter_; }

  /// Canonical text form, round-trips through parse().
  std::string to_string() const;
  /// File-name safe form ("overlap_rate_20").
  std::string file_stem() const;

  friend bool operator==(const MetricId&, const MetricId&) = default;

 private:
  MetricId(MetricKind kind, std::optional<double> parameter) : kind_(kind), parameter_(parameter) {}

  MetricKind kind_ = MetricKind::mad;
  std::optional<double> parameter_;
};

enum class UndefinedReason { none, zero_variance, too_few_pixels, no_defined_seed };

std::string_view to_string(UndefinedReason reason);

/// A metric result that may be undefined (e.g. correlation of a constant map).
struct MetricValue {
  std::optional<double> value;
  UndefinedReason reason = UndefinedReason::none;

  static MetricValue of(double v) { return {v, UndefinedReason::none}; }
  static MetricValue undefined(UndefinedReason why) { return {std::nullopt, why}; }
  bool defined() const noexcept { return value.has_value(); }

  friend bool operator==(const MetricValue&, const MetricValue&) = default;
};

/// Values of one metric for one augmented model, aligned with `image_ids`.
struct MetricMatrix {
  MetricId metric;
  ModelId model;
  std::vector<std::string> image_ids;
  std::vector<MetricValue> values;
};

/// Per-image seed mean of one metric for one augmentation.
struct AggregatedMetricVector {
  MetricId metric;
  std::string augmentation;
  std::vector<std::string> image_ids;
  std::vector<MetricValue> values;
  std::vector<std::size_t> contributing_seeds;
  std::size_t seed_count = 0;
};

}  // namespace camdiff
