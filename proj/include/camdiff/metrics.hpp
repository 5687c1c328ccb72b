// CAM similarity metrics, the prediction divergence and macro classification
// scores.
//
// Pairwise CAM metrics take (P, Q) = (augmented, baseline). Every reduction
// walks pixels in row-major order, so results are bit-identical for identical
// inputs whatever the caller's threading.

#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "camdiff/types.hpp"

namespace camdiff {

inline constexpr double kDefaultKldEpsilon = 1e-10;
/// Lower bound applied to augmented-model probabilities in class_kld.
inline constexpr double kKldProbabilityFloor = 1e-12;

double mad(std::span<const double> p, std::span<const double> q);
double mad(const Cam& p, const Cam& q);

double msd(std::span<const double> p, std::span<const double> q);
double msd(const Cam& p, const Cam& q);

/// Population Pearson correlation, clamped to [-1, 1]. Undefined
/// (zero_variance) when either input is constant. Throws for N < 2.
MetricValue pearson(std::span<const double> p, std::span<const double> q);
MetricValue pearson(const Cam& p, const Cam& q);

/// 1-based average ranks; tied values share the mean of the ranks they span.
struct RankVector {
  std::vector<double> ranks;
};

RankVector rank_transform(std::span<const double> v);

/// Pearson correlation of the rank transforms.
MetricValue spearman(std::span<const double> p, std::span<const double> q);
MetricValue spearman(const Cam& p, const Cam& q);

/// Indices {j : v_j >= k-th largest value}, k = ceil(N * percent / 100).
/// Ties at the threshold enlarge the set beyond k.
std::vector<std::size_t> top_region(std::span<const double> v, double percent);

/// Intersection over union of the two top regions.
double overlap_rate(std::span<const double> p, std::span<const double> q, double percent);
double overlap_rate(const Cam& p, const Cam& q, double percent);

/// sum_i Q_i * ln(eps + Q_i / max(P_i, floor)); terms with Q_i = 0 are 0.
/// P is the augmented model's distribution, Q the baseline's.
double class_kld(std::span<const double> p, std::span<const double> q, double epsilon);
double class_kld(const PredictionRecord& p, const PredictionRecord& q, double epsilon);

/// Rows are ground truth, columns predicted class.
class ConfusionMatrix {
 public:
  explicit ConfusionMatrix(std::size_t classes) : classes_(classes), counts_(classes * classes, 0) {}

  std::size_t classes() const noexcept { return classes_; }
  std::uint64_t at(std::size_t truth, std::size_t predicted) const {
    return counts_.at(truth * classes_ + predicted);
  }
  void add(std::size_t truth, std::size_t predicted, std::uint64_t n = 1);
  std::uint64_t total() const noexcept;

 private:
  std::size_t classes_;
  std::vector<std::uint64_t> counts_;
};

ConfusionMatrix confusion_matrix(std::span<const PredictionRecord> predictions,
                                 const GroundTruthTable& truth, std::size_t class_count);

struct MacroScores {
  double accuracy = 0.0;
  double macro_precision = 0.0;
  double macro_recall = 0.0;
  double macro_f1 = 0.0;
  /// Classes where precision or recall was 0/0 and counted as 0.
  std::vector<std::size_t> zero_division_classes;
};

MacroScores macro_scores(const ConfusionMatrix& cm);

/// Evaluates `metric` for one image. CAM metrics read the two maps, class_kld
/// the two prediction records. Correlation inputs with N < 2 come back
/// undefined (too_few_pixels) instead of throwing.
MetricValue evaluate_metric(const MetricId& metric, const Cam& augmented_cam, const Cam& baseline_cam,
                            const PredictionRecord& augmented_prediction,
                            const PredictionRecord& baseline_prediction);

}  // namespace camdiff
