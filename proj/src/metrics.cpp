#include "camdiff/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>

#include <fmt/format.h>

namespace camdiff {
namespace {

void require_same_size(std::span<const double> p, std::span<const double> q, const char* what) {
  if (p.size() != q.size()) {
    throw Error(fmt::format("{}: dimension mismatch ({} vs {} values)", what, p.size(), q.size()));
  }
  if (p.empty()) throw Error(fmt::format("{}: empty input", what));
}

void require_same_shape(const Cam& p, const Cam& q, const char* what) {
  if (!p.same_shape(q)) {
    throw Error(fmt::format("{}: dimension mismatch ({}x{} vs {}x{})", what, p.height(), p.width(),
                            q.height(), q.width()));
  }
}

bool is_constant(std::span<const double> v) {
  return std::all_of(v.begin(), v.end(), [&](double x) { return x == v.front(); });
}

double mean_of(std::span<const double> v) {
  double sum = 0.0;
  for (double x : v) sum += x;
  return sum / static_cast<double>(v.size());
}

}  // namespace

double mad(std::span<const double> p, std::span<const double> q) {
  require_same_size(p, q, "mad");
  double sum = 0.0;
  for (std::size_t j = 0; j < p.size(); ++j) sum += std::abs(p[j] - q[j]);
  return sum / static_cast<double>(p.size());
}

double mad(const Cam& p, const Cam& q) {
  require_same_shape(p, q, "mad");
  return mad(p.values(), q.values());
}

double msd(std::span<const double> p, std::span<const double> q) {
  require_same_size(p, q, "msd");
  double sum = 0.0;
  for (std::size_t j = 0; j < p.size(); ++j) {
    const double d = p[j] - q[j];
    sum += d * d;
  }
  return sum / static_cast<double>(p.size());
}

double msd(const Cam& p, const Cam& q) {
  require_same_shape(p, q, "msd");
  return msd(p.values(), q.values());
}

MetricValue pearson(std::span<const double> p, std::span<const double> q) {
  require_same_size(p, q, "pearson");
  if (p.size() < 2) throw Error("pearson: needs at least 2 values");
  if (is_constant(p) || is_constant(q)) return MetricValue::undefined(UndefinedReason::zero_variance);

  const double mp = mean_of(p);
  const double mq = mean_of(q);
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t j = 0; j < p.size(); ++j) {
    const double dp = p[j] - mp;
    const double dq = q[j] - mq;
    sxy += dp * dq;
    sxx += dp * dp;
    syy += dq * dq;
  }
  if (sxx == 0.0 || syy == 0.0) return MetricValue::undefined(UndefinedReason::zero_variance);
  // sqrt(s * s) == s exactly, so pearson(P, P) is exactly 1.
  const double r = sxy / std::sqrt(sxx * syy);
  return MetricValue::of(std::clamp(r, -1.0, 1.0));
}

MetricValue pearson(const Cam& p, const Cam& q) {
  require_same_shape(p, q, "pearson");
  return pearson(p.values(), q.values());
}

RankVector rank_transform(std::span<const double> v) {
  std::vector<std::size_t> order(v.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });

  RankVector out{std::vector<double>(v.size())};
  std::size_t start = 0;
  while (start < order.size()) {
    std::size_t end = start;
    while (end + 1 < order.size() && v[order[end + 1]] == v[order[start]]) ++end;
    // positions start..end (0-based) share rank mean((start+1)..(end+1))
    const double rank = static_cast<double>(start + end) / 2.0 + 1.0;
    for (std::size_t i = start; i <= end; ++i) out.ranks[order[i]] = rank;
    start = end + 1;
  }
  return out;
}

MetricValue spearman(std::span<const double> p, std::span<const double> q) {
  require_same_size(p, q, "spearman");
  if (p.size() < 2) throw Error("spearman: needs at least 2 values");
  const RankVector rp = rank_transform(p);
  const RankVector rq = rank_transform(q);
  return pearson(rp.ranks, rq.ranks);
}

MetricValue spearman(const Cam& p, const Cam& q) {
  require_same_shape(p, q, "spearman");
  return spearman(p.values(), q.values());
}

std::vector<std::size_t> top_region(std::span<const double> v, double percent) {
  if (!(percent > 0.0 && percent < 100.0)) {
    throw Error(fmt::format("overlap_rate: Y out of range ({})", percent));
  }
  if (v.empty()) throw Error("overlap_rate: empty input");
  const double n = static_cast<double>(v.size());
  auto k = static_cast<std::size_t>(std::ceil(n * percent / 100.0));
  k = std::clamp<std::size_t>(k, 1, v.size());

  std::vector<double> sorted(v.begin(), v.end());
  std::nth_element(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(k - 1), sorted.end(),
                   std::greater<>{});
  const double threshold = sorted[k - 1];

  std::vector<std::size_t> region;
  for (std::size_t j = 0; j < v.size(); ++j) {
    if (v[j] >= threshold) region.push_back(j);
  }
  return region;
}

double overlap_rate(std::span<const double> p, std::span<const double> q, double percent) {
  require_same_size(p, q, "overlap_rate");
  const auto top_p = top_region(p, percent);
  const auto top_q = top_region(q, percent);
  std::vector<char> in_p(p.size(), 0);
  for (auto j : top_p) in_p[j] = 1;
  std::size_t intersection = 0;
  for (auto j : top_q) intersection += static_cast<std::size_t>(in_p[j]);
  const std::size_t uni = top_p.size() + top_q.size() - intersection;
  return static_cast<double>(intersection) / static_cast<double>(uni);
}

double overlap_rate(const Cam& p, const Cam& q, double percent) {
  require_same_shape(p, q, "overlap_rate");
  return overlap_rate(p.values(), q.values(), percent);
}

double class_kld(std::span<const double> p, std::span<const double> q, double epsilon) {
  if (p.size() != q.size()) {
    throw Error(fmt::format("class_kld: length mismatch ({} vs {})", p.size(), q.size()));
  }
  if (!(epsilon >= 0.0)) throw Error("class_kld: epsilon must be >= 0");
  double sum = 0.0;
  for (std::size_t i = 0; i < q.size(); ++i) {
    if (q[i] == 0.0) continue;
    sum += q[i] * std::log(epsilon + q[i] / std::max(p[i], kKldProbabilityFloor));
  }
  if (!std::isfinite(sum)) throw Error("class_kld: result is not finite");
  return sum;
}

double class_kld(const PredictionRecord& p, const PredictionRecord& q, double epsilon) {
  return class_kld(p.probabilities, q.probabilities, epsilon);
}

void ConfusionMatrix::add(std::size_t truth, std::size_t predicted, std::uint64_t n) {
  if (truth >= classes_ || predicted >= classes_) {
    throw Error(fmt::format("confusion matrix: class index out of range ({}, {}) for {} classes",
                            truth, predicted, classes_));
  }
  counts_[truth * classes_ + predicted] += n;
}

std::uint64_t ConfusionMatrix::total() const noexcept {
  return std::accumulate(counts_.begin(), counts_.end(), std::uint64_t{0});
}

ConfusionMatrix confusion_matrix(std::span<const PredictionRecord> predictions,
                                 const GroundTruthTable& truth, std::size_t class_count) {
  ConfusionMatrix cm(class_count);
  for (const auto& rec : predictions) {
    const auto label = truth.label_of(rec.image_id);
    if (!label) throw Error(fmt::format("confusion matrix: unknown image_id '{}'", rec.image_id));
    cm.add(*label, rec.predicted_class);
  }
  return cm;
}

MacroScores macro_scores(const ConfusionMatrix& cm) {
  const std::size_t c = cm.classes();
  const std::uint64_t total = cm.total();
  if (c == 0 || total == 0) throw Error("macro scores: empty confusion matrix");

  MacroScores s;
  std::uint64_t trace = 0;
  double precision_sum = 0.0, recall_sum = 0.0, f1_sum = 0.0;
  for (std::size_t k = 0; k < c; ++k) {
    const std::uint64_t tp = cm.at(k, k);
    std::uint64_t predicted = 0, actual = 0;
    for (std::size_t o = 0; o < c; ++o) {
      predicted += cm.at(o, k);
      actual += cm.at(k, o);
    }
    trace += tp;
    const double precision = predicted ? static_cast<double>(tp) / static_cast<double>(predicted) : 0.0;
    const double recall = actual ? static_cast<double>(tp) / static_cast<double>(actual) : 0.0;
    const double f1 =
        precision + recall > 0.0 ? 2.0 * (recall * precision) / (recall + precision) : 0.0;
    if (predicted == 0 || actual == 0) s.zero_division_classes.push_back(k);
    precision_sum += precision;
    recall_sum += recall;
    f1_sum += f1;
  }
  s.accuracy = static_cast<double>(trace) / static_cast<double>(total);
  s.macro_precision = precision_sum / static_cast<double>(c);
  s.macro_recall = recall_sum / static_cast<double>(c);
  s.macro_f1 = f1_sum / static_cast<double>(c);
  return s;
}

MetricValue evaluate_metric(const MetricId& metric, const Cam& augmented_cam, const Cam& baseline_cam,
                            const PredictionRecord& augmented_prediction,
                            const PredictionRecord& baseline_prediction) {
  switch (metric.kind()) {
    case MetricKind::mad: return MetricValue::of(mad(augmented_cam, baseline_cam));
    case MetricKind::msd: return MetricValue::of(msd(augmented_cam, baseline_cam));
    case MetricKind::pearson:
      if (augmented_cam.size() < 2) return MetricValue::undefined(UndefinedReason::too_few_pixels);
      return pearson(augmented_cam, baseline_cam);
    case MetricKind::spearman:
      if (augmented_cam.size() < 2) return MetricValue::undefined(UndefinedReason::too_few_pixels);
      return spearman(augmented_cam, baseline_cam);
    case MetricKind::overlap_rate:
      return MetricValue::of(overlap_rate(augmented_cam, baseline_cam, *metric.parameter()));
    case MetricKind::class_kld:
      return MetricValue::of(
          class_kld(augmented_prediction, baseline_prediction, metric.parameter().value_or(kDefaultKldEpsilon)));
  }
  throw Error("evaluate_metric: unknown metric");
}

}  // namespace camdiff
