// Seed aggregation, distribution statistics, cross-augmentation correlation,
// pair rankings, correctness segmentation and extreme-image selection.

#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "camdiff/interchange.hpp"
#include "camdiff/types.hpp"

namespace camdiff {

/// Per-image mean over the seeds that have a defined value. Seeds are summed in
/// seed-label order whatever the argument order.
AggregatedMetricVector aggregate_over_seeds(std::span<const MetricMatrix> matrices);

/// Tukey box: type-7 quartiles, whiskers at the most extreme points within
/// 1.5 IQR of the quartiles, everything beyond is an outlier.
struct BoxplotStats {
  double median = 0.0;
  double q1 = 0.0;
  double q3 = 0.0;
  double whisker_low = 0.0;
  double whisker_high = 0.0;
  std::vector<double> outliers;  // ascending
  std::size_t defined_count = 0;
  std::size_t undefined_count = 0;
};

/// Type-7 (linear interpolation) quantile of sorted data.
double quantile_sorted(std::span<const double> sorted, double p);

BoxplotStats boxplot_stats(std::span<const MetricValue> values);
BoxplotStats boxplot_stats(const AggregatedMetricVector& vector);

enum class CorrelationMethod { pearson, spearman };
/// Pairwise: each pair uses images defined in both vectors. Listwise: only
/// images defined in every vector.
enum class Deletion { pairwise, listwise };

std::string_view to_string(CorrelationMethod method);
CorrelationMethod parse_correlation_method(std::string_view text);

struct CorrelationMap {
  MetricId metric;
  std::vector<std::string> augmentations;
  /// Row-major n x n; unit diagonal. An entry is empty when one side is
  /// constant over the shared images.
  std::vector<std::optional<double>> matrix;
  /// Shared defined-image count per entry (row-major).
  std::vector<std::size_t> pair_samples;
  /// Minimum of pair_samples over off-diagonal entries.
  std::size_t sample_count = 0;

  std::size_t size() const noexcept { return augmentations.size(); }
  std::optional<double> at(std::size_t i, std::size_t j) const { return matrix.at(i * size() + j); }
};

CorrelationMap correlation_map(std::span<const AggregatedMetricVector> vectors, CorrelationMethod method,
                               Deletion deletion = Deletion::pairwise);

/// Unordered augmentation pair, stored with first < second.
struct AugPair {
  std::string first;
  std::string second;

  static AugPair of(std::string a, std::string b);
  std::string label() const { return first + "|" + second; }
  friend auto operator<=>(const AugPair&, const AugPair&) = default;
};

struct RankedPair {
  AugPair pair;
  std::optional<double> value;
};

struct PairRanking {
  std::vector<RankedPair> strongest;
  std::vector<RankedPair> weakest;
};

/// strongest: value descending, ties by pair name ascending. weakest: the
/// exact reverse order. Undefined entries rank after every defined one in both
/// lists.
PairRanking rank_pairs(const CorrelationMap& map, std::size_t k);

enum class RankDirection { strongest, weakest };

struct PairFrequencyTable {
  RankDirection direction = RankDirection::strongest;
  std::size_t k = 0;
  /// Every augmentation pair in augmentation order, including zero counts.
  std::vector<std::pair<AugPair, std::size_t>> counts;
  std::size_t metric_count = 0;

  std::size_t count(const AugPair& pair) const;
  std::size_t total() const;
};

std::pair<PairFrequencyTable, PairFrequencyTable> pair_frequency_tables(std::span<const CorrelationMap> maps,
                                                                        std::size_t k);

enum class Segment { both_correct, baseline_only_correct, augmented_only_correct, both_wrong };
inline constexpr Segment kAllSegments[] = {Segment::both_correct, Segment::baseline_only_correct,
                                           Segment::augmented_only_correct, Segment::both_wrong};

std::string_view to_string(Segment segment);

/// Coarser view merging the two single-correct cases.
enum class MergedSegment { both_correct, one_correct, both_wrong };
MergedSegment merge(Segment segment);

struct Segmentation {
  std::vector<std::string> image_ids;
  std::vector<Segment> labels;

  std::size_t count(Segment s) const;
};

Segmentation segment_by_correctness(const Dataset& dataset, const std::string& augmentation,
                                    const std::string& seed);

/// Boxplot per segment of `values` (aligned with `image_ids`). Segments with
/// no entries are absent.
std::map<Segment, BoxplotStats> segmented_boxplots(std::span<const std::string> image_ids,
                                                   std::span<const MetricValue> values,
                                                   const Segmentation& segmentation);

enum class ExtremeStatistic { mean, stdev };
std::string_view to_string(ExtremeStatistic statistic);
ExtremeStatistic parse_extreme_statistic(std::string_view text);

struct ExtremeImage {
  std::string image_id;
  double value = 0.0;
};

/// Image maximizing the mean or population standard deviation of its
/// aggregated values across augmentations. Only images defined in every
/// vector compete; ties go to the earliest image.
ExtremeImage find_extreme_images(std::span<const AggregatedMetricVector> vectors, ExtremeStatistic statistic);

}  // namespace camdiff
