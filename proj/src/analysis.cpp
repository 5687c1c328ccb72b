#include "camdiff/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include <fmt/format.h>

#include "camdiff/metrics.hpp"

namespace camdiff {

AggregatedMetricVector aggregate_over_seeds(std::span<const MetricMatrix> matrices) {
  if (matrices.empty()) throw Error("aggregate: no seed matrices");
  const auto& first = matrices.front();
  if (first.model.is_baseline()) throw Error("aggregate: baseline matrix given");
  for (const auto& m : matrices) {
    if (!(m.metric == first.metric)) throw Error("aggregate: mixed metrics");
    if (m.model.augmentation != first.model.augmentation) throw Error("aggregate: mixed augmentations");
    if (m.image_ids != first.image_ids || m.values.size() != m.image_ids.size()) {
      throw Error("aggregate: matrices cover different image sets");
    }
  }
  std::vector<const MetricMatrix*> by_seed;
  for (const auto& m : matrices) by_seed.push_back(&m);
  std::sort(by_seed.begin(), by_seed.end(),
            [](const MetricMatrix* a, const MetricMatrix* b) { return *a->model.seed < *b->model.seed; });
  for (std::size_t s = 1; s < by_seed.size(); ++s) {
    if (*by_seed[s]->model.seed == *by_seed[s - 1]->model.seed) throw Error("aggregate: duplicate seed");
  }

  AggregatedMetricVector out;
  out.metric = first.metric;
  out.augmentation = *first.model.augmentation;
  out.image_ids = first.image_ids;
  out.seed_count = matrices.size();
  out.values.resize(out.image_ids.size());
  out.contributing_seeds.resize(out.image_ids.size());
  for (std::size_t i = 0; i < out.image_ids.size(); ++i) {
    double sum = 0.0;
    std::size_t n = 0;
    for (const auto* m : by_seed) {
      if (const auto& v = m->values[i]; v.defined()) {
        sum += *v.value;
        ++n;
      }
    }
    out.contributing_seeds[i] = n;
    out.values[i] = n ? MetricValue::of(sum / static_cast<double>(n))
                      : MetricValue::undefined(UndefinedReason::no_defined_seed);
  }
  return out;
}

double quantile_sorted(std::span<const double> sorted, double p) {
  if (sorted.empty()) throw Error("quantile: empty data");
  const double h = static_cast<double>(sorted.size() - 1) * p;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  if (lo + 1 >= sorted.size()) return sorted.back();
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[lo + 1] - sorted[lo]);
}

BoxplotStats boxplot_stats(std::span<const MetricValue> values) {
  std::vector<double> data;
  BoxplotStats s;
  for (const auto& v : values) {
    if (v.defined()) {
      data.push_back(*v.value);
    } else {
      ++s.undefined_count;
    }
  }
  if (data.empty()) throw Error("boxplot: zero defined entries");
  std::sort(data.begin(), data.end());
  s.defined_count = data.size();
  s.q1 = quantile_sorted(data, 0.25);
  s.median = quantile_sorted(data, 0.5);
  s.q3 = quantile_sorted(data, 0.75);
  const double iqr = s.q3 - s.q1;
  const double low_fence = s.q1 - 1.5 * iqr;
  const double high_fence = s.q3 + 1.5 * iqr;
  s.whisker_low = s.q1;
  s.whisker_high = s.q3;
  bool have_low = false;
  for (double x : data) {
    if (x < low_fence || x > high_fence) {
      s.outliers.push_back(x);
      continue;
    }
    if (!have_low) {
      s.whisker_low = x;
      have_low = true;
    }
    s.whisker_high = x;
  }
  return s;
}

BoxplotStats boxplot_stats(const AggregatedMetricVector& vector) { return boxplot_stats(vector.values); }

std::string_view to_string(CorrelationMethod method) {
  return method == CorrelationMethod::pearson ? "pearson" : "spearman";
}

CorrelationMethod parse_correlation_method(std::string_view text) {
  if (text == "pearson") return CorrelationMethod::pearson;
  if (text == "spearman") return CorrelationMethod::spearman;
  throw Error(fmt::format("unknown correlation method '{}'", text));
}

CorrelationMap correlation_map(std::span<const AggregatedMetricVector> vectors, CorrelationMethod method,
                               Deletion deletion) {
  if (vectors.size() < 2) throw Error("correlation map: needs at least 2 augmentations");
  const auto& first = vectors.front();
  std::set<std::string> names;
  for (const auto& v : vectors) {
    if (!(v.metric == first.metric)) throw Error("correlation map: mixed metrics");
    if (v.image_ids != first.image_ids) throw Error("correlation map: vectors cover different image sets");
    if (!names.insert(v.augmentation).second) {
      throw Error(fmt::format("correlation map: augmentation '{}' given twice", v.augmentation));
    }
  }
  const std::size_t n = vectors.size();
  const std::size_t n_images = first.image_ids.size();

  std::vector<char> usable(n_images, 1);
  if (deletion == Deletion::listwise) {
    for (std::size_t i = 0; i < n_images; ++i) {
      for (const auto& v : vectors) usable[i] = usable[i] && v.values[i].defined();
    }
  }

  CorrelationMap map;
  map.metric = first.metric;
  for (const auto& v : vectors) map.augmentations.push_back(v.augmentation);
  map.matrix.assign(n * n, std::nullopt);
  map.pair_samples.assign(n * n, 0);
  map.sample_count = n_images;

  std::vector<double> x, y;
  for (std::size_t a = 0; a < n; ++a) {
    map.matrix[a * n + a] = 1.0;
    map.pair_samples[a * n + a] = static_cast<std::size_t>(
        std::count_if(vectors[a].values.begin(), vectors[a].values.end(), [](const MetricValue& v) { return v.defined(); }));
    for (std::size_t b = a + 1; b < n; ++b) {
      x.clear();
      y.clear();
      for (std::size_t i = 0; i < n_images; ++i) {
        const auto& va = vectors[a].values[i];
        const auto& vb = vectors[b].values[i];
        if (usable[i] && va.defined() && vb.defined()) {
          x.push_back(*va.value);
          y.push_back(*vb.value);
        }
      }
      if (x.size() < 2) {
        throw Error(fmt::format("correlation map: fewer than 2 shared defined images for {} and {}",
                                vectors[a].augmentation, vectors[b].augmentation));
      }
      const MetricValue r = method == CorrelationMethod::pearson ? pearson(x, y) : spearman(x, y);
      map.matrix[a * n + b] = map.matrix[b * n + a] = r.value;
      map.pair_samples[a * n + b] = map.pair_samples[b * n + a] = x.size();
      map.sample_count = std::min(map.sample_count, x.size());
    }
  }
  return map;
}

AugPair AugPair::of(std::string a, std::string b) {
  if (b < a) std::swap(a, b);
  return AugPair{std::move(a), std::move(b)};
}

PairRanking rank_pairs(const CorrelationMap& map, std::size_t k) {
  const std::size_t n = map.size();
  const std::size_t total = n * (n - 1) / 2;
  if (k == 0 || k > total) throw Error(fmt::format("rank pairs: k out of range ({} for {} pairs)", k, total));

  std::vector<RankedPair> defined, undefined;
  for (std::size_t a = 0; a < n; ++a) {
    for (std::size_t b = a + 1; b < n; ++b) {
      RankedPair rp{AugPair::of(map.augmentations[a], map.augmentations[b]), map.at(a, b)};
      (rp.value ? defined : undefined).push_back(std::move(rp));
    }
  }
  std::sort(defined.begin(), defined.end(), [](const RankedPair& l, const RankedPair& r) {
    if (*l.value != *r.value) return *l.value > *r.value;
    return l.pair < r.pair;
  });
  std::sort(undefined.begin(), undefined.end(),
            [](const RankedPair& l, const RankedPair& r) { return l.pair < r.pair; });

  PairRanking out;
  out.strongest = defined;
  out.strongest.insert(out.strongest.end(), undefined.begin(), undefined.end());
  out.weakest.assign(defined.rbegin(), defined.rend());
  out.weakest.insert(out.weakest.end(), undefined.begin(), undefined.end());
  out.strongest.resize(k);
  out.weakest.resize(k);
  return out;
}

std::size_t PairFrequencyTable::count(const AugPair& pair) const {
  for (const auto& [p, c] : counts) {
    if (p == pair) return c;
  }
  return 0;
}

std::size_t PairFrequencyTable::total() const {
  std::size_t t = 0;
  for (const auto& entry : counts) t += entry.second;
  return t;
}

std::pair<PairFrequencyTable, PairFrequencyTable> pair_frequency_tables(std::span<const CorrelationMap> maps,
                                                                        std::size_t k) {
  if (maps.empty()) throw Error("frequency tables: no correlation maps");
  const auto& augs = maps.front().augmentations;
  const std::set<std::string> reference(augs.begin(), augs.end());
  for (const auto& m : maps) {
    if (std::set<std::string>(m.augmentations.begin(), m.augmentations.end()) != reference ||
        m.augmentations.size() != augs.size()) {
      throw Error("frequency tables: inconsistent augmentation sets");
    }
  }

  PairFrequencyTable strongest{RankDirection::strongest, k, {}, maps.size()};
  PairFrequencyTable weakest{RankDirection::weakest, k, {}, maps.size()};
  for (std::size_t a = 0; a < augs.size(); ++a) {
    for (std::size_t b = a + 1; b < augs.size(); ++b) {
      const AugPair p = AugPair::of(augs[a], augs[b]);
      strongest.counts.emplace_back(p, 0);
      weakest.counts.emplace_back(p, 0);
    }
  }
  auto bump = [](PairFrequencyTable& t, const AugPair& p) {
    for (auto& [q, c] : t.counts) {
      if (q == p) ++c;
    }
  };
  for (const auto& m : maps) {
    const auto ranking = rank_pairs(m, k);
    for (const auto& rp : ranking.strongest) bump(strongest, rp.pair);
    for (const auto& rp : ranking.weakest) bump(weakest, rp.pair);
  }
  return {std::move(strongest), std::move(weakest)};
}

std::string_view to_string(Segment segment) {
  switch (segment) {
    case Segment::both_correct: return "both_correct";
    case Segment::baseline_only_correct: return "baseline_only_correct";
    case Segment::augmented_only_correct: return "augmented_only_correct";
    case Segment::both_wrong: return "both_wrong";
  }
  return "unknown";
}

MergedSegment merge(Segment segment) {
  switch (segment) {
    case Segment::both_correct: return MergedSegment::both_correct;
    case Segment::both_wrong: return MergedSegment::both_wrong;
    default: return MergedSegment::one_correct;
  }
}

std::size_t Segmentation::count(Segment s) const {
  return static_cast<std::size_t>(std::count(labels.begin(), labels.end(), s));
}

Segmentation segment_by_correctness(const Dataset& dataset, const std::string& augmentation, const std::string& seed) {
  const auto& base = dataset.baseline();
  const auto& aug = dataset.model(ModelId::augmented(augmentation, seed));
  Segmentation out;
  out.image_ids = dataset.manifest.image_ids;
  out.labels.reserve(out.image_ids.size());
  for (std::size_t i = 0; i < out.image_ids.size(); ++i) {
    const auto truth = dataset.truth.label_of(out.image_ids[i]);
    if (!truth) throw Error(fmt::format("segmentation: no ground truth for {}", out.image_ids[i]));
    if (i >= base.predictions.size() || i >= aug.predictions.size()) {
      throw Error(fmt::format("segmentation: missing prediction for {}", out.image_ids[i]));
    }
    const bool b = base.predictions[i].predicted_class == *truth;
    const bool a = aug.predictions[i].predicted_class == *truth;
    out.labels.push_back(b ? (a ? Segment::both_correct : Segment::baseline_only_correct)
                           : (a ? Segment::augmented_only_correct : Segment::both_wrong));
  }
  return out;
}

std::map<Segment, BoxplotStats> segmented_boxplots(std::span<const std::string> image_ids,
                                                   std::span<const MetricValue> values,
                                                   const Segmentation& segmentation) {
  if (image_ids.size() != values.size() ||
      !std::equal(image_ids.begin(), image_ids.end(), segmentation.image_ids.begin(), segmentation.image_ids.end())) {
    throw Error("segmented boxplots: segmentation does not match the image set");
  }
  std::map<Segment, std::vector<MetricValue>> groups;
  for (std::size_t i = 0; i < values.size(); ++i) groups[segmentation.labels[i]].push_back(values[i]);
  std::map<Segment, BoxplotStats> out;
  for (const auto& [segment, group] : groups) {
    if (std::any_of(group.begin(), group.end(), [](const MetricValue& v) { return v.defined(); })) {
      out.emplace(segment, boxplot_stats(group));
    }
  }
  return out;
}

std::string_view to_string(ExtremeStatistic statistic) {
  return statistic == ExtremeStatistic::mean ? "mean" : "stdev";
}

ExtremeStatistic parse_extreme_statistic(std::string_view text) {
  if (text == "mean") return ExtremeStatistic::mean;
  if (text == "stdev") return ExtremeStatistic::stdev;
  throw Error(fmt::format("unknown statistic '{}'", text));
}

ExtremeImage find_extreme_images(std::span<const AggregatedMetricVector> vectors, ExtremeStatistic statistic) {
  if (vectors.empty()) throw Error("extreme images: no vectors");
  if (statistic == ExtremeStatistic::stdev && vectors.size() < 2) {
    throw Error("extreme images: stdev needs at least 2 augmentations");
  }
  const auto& ids = vectors.front().image_ids;
  for (const auto& v : vectors) {
    if (v.image_ids != ids) throw Error("extreme images: vectors cover different image sets");
  }
  const double n = static_cast<double>(vectors.size());
  std::optional<ExtremeImage> best;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    bool all_defined = true;
    double sum = 0.0;
    for (const auto& v : vectors) {
      if (!v.values[i].defined()) {
        all_defined = false;
        break;
      }
      sum += *v.values[i].value;
    }
    if (!all_defined) continue;
    const double mean = sum / n;
    double score = mean;
    if (statistic == ExtremeStatistic::stdev) {
      double ss = 0.0;
      for (const auto& v : vectors) {
        const double d = *v.values[i].value - mean;
        ss += d * d;
      }
      score = std::sqrt(ss / n);
    }
    if (!best || score > best->value) best = ExtremeImage{ids[i], score};
  }
  if (!best) throw Error("extreme images: no image is defined across all augmentations");
  return *best;
}

}  // namespace camdiff
