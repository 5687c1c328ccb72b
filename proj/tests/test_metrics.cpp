#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "camdiff/metrics.hpp"
#include "oracle.hpp"
#include "test_util.hpp"

using namespace camdiff;
using camdiff::testing::grid_distribution;
using camdiff::testing::grid_values;

namespace {

constexpr double kTol = 1e-12;

void expect_same(const MetricValue& got, const std::optional<double>& want) {
  ASSERT_EQ(got.defined(), want.has_value());
  if (want) EXPECT_NEAR(*got.value, *want, kTol);
}

/// Every value vector of length n drawn from `levels`, visited with `stride`.
template <class Fn>
void for_each_vector(std::size_t n, const std::vector<double>& levels, std::size_t stride, Fn fn) {
  std::size_t total = 1;
  for (std::size_t i = 0; i < n; ++i) total *= levels.size();
  std::vector<double> v(n);
  for (std::size_t code = 0; code < total; code += stride) {
    std::size_t c = code;
    for (std::size_t i = 0; i < n; ++i) {
      v[i] = levels[c % levels.size()];
      c /= levels.size();
    }
    fn(v);
  }
}

}  // namespace

TEST(Mad, WorkedExample) {
  const std::vector<double> p{0.2, 0.8}, q{0.5, 0.5};
  EXPECT_NEAR(mad(p, q), 0.3, kTol);
  EXPECT_NEAR(msd(p, q), 0.09, kTol);
}

TEST(Pearson, WorkedExample) {
  const std::vector<double> p{0.0, 0.5, 1.0}, q{0.0, 1.0, 1.0};
  EXPECT_NEAR(*pearson(p, q).value, std::sqrt(3.0) / 2.0, kTol);
}

TEST(Pearson, ConstantInputIsUndefined) {
  const std::vector<double> p{0.3, 0.3, 0.3}, q{0.1, 0.2, 0.3};
  EXPECT_EQ(pearson(p, q).reason, UndefinedReason::zero_variance);
  EXPECT_EQ(pearson(q, p).reason, UndefinedReason::zero_variance);
  EXPECT_EQ(spearman(p, q).reason, UndefinedReason::zero_variance);
}

TEST(Pearson, TooFewPixelsThrows) {
  const std::vector<double> one{0.5};
  EXPECT_THROW(pearson(one, one), Error);
}

TEST(Pearson, SelfCorrelationIsExactlyOne) {
  std::mt19937_64 rng(3);
  for (int t = 0; t < 200; ++t) {
    auto p = grid_values(rng, 2 + rng() % 50);
    if (oracle::constant(p)) continue;
    EXPECT_EQ(*pearson(p, p).value, 1.0);
  }
}

TEST(RankTransform, AverageRanks) {
  EXPECT_EQ(rank_transform(std::vector<double>{0.9, 0.1, 0.5}).ranks, (std::vector<double>{3, 1, 2}));
  EXPECT_EQ(rank_transform(std::vector<double>{0.5, 0.5}).ranks, (std::vector<double>{1.5, 1.5}));
  EXPECT_EQ(rank_transform(std::vector<double>{0.1, 0.1, 0.1, 0.9}).ranks, (std::vector<double>{2, 2, 2, 4}));
}

TEST(Spearman, MonotoneTransformInvariant) {
  std::mt19937_64 rng(5);
  for (int t = 0; t < 200; ++t) {
    const std::size_t n = 2 + rng() % 40;
    auto p = grid_values(rng, n), q = grid_values(rng, n);
    std::vector<double> p2(n);
    for (std::size_t j = 0; j < n; ++j) p2[j] = p[j] * p[j];
    const auto a = spearman(p, q), b = spearman(p2, q);
    ASSERT_EQ(a.defined(), b.defined());
    if (a.defined()) EXPECT_EQ(*a.value, *b.value);
  }
}

TEST(OverlapRate, TiesEnlargeTheRegion) {
  const std::vector<double> p{0.9, 0.9, 0.1, 0.0}, q{0.1, 0.9, 0.9, 0.0};
  EXPECT_EQ(top_region(p, 25).size(), 2u);
  EXPECT_NEAR(overlap_rate(p, q, 25), 1.0 / 3.0, kTol);
}

TEST(OverlapRate, RegionSizeIsCeiling) {
  const std::vector<double> v{0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0};
  EXPECT_EQ(top_region(v, 20).size(), 2u);
  EXPECT_EQ(top_region(v, 5).size(), 1u);
  EXPECT_EQ(top_region(v, 11).size(), 2u);
  EXPECT_EQ(top_region(v, 99).size(), 10u);
}

TEST(ClassKld, WorkedExample) {
  const std::vector<double> p{0.25, 0.75}, q{0.5, 0.5};
  EXPECT_NEAR(class_kld(p, q, 0.0), 0.5 * std::log(2.0) + 0.5 * std::log(2.0 / 3.0), kTol);
  EXPECT_NEAR(class_kld(p, q, 1e-10), 0.5 * std::log(2.0) + 0.5 * std::log(2.0 / 3.0), 1e-9);
}

TEST(ClassKld, ZeroBaselineTermsVanishAndZeroAugmentedIsFloored) {
  const std::vector<double> p{0.0, 1.0}, q{0.0, 1.0};
  EXPECT_NEAR(class_kld(p, q, 0.0), 0.0, kTol);
  const std::vector<double> p0{0.0, 1.0}, q0{1.0, 0.0};
  const double v = class_kld(p0, q0, 0.0);
  EXPECT_TRUE(std::isfinite(v));
  EXPECT_NEAR(v, std::log(1e12), 1e-9);
}

TEST(Macro, WorkedExample) {
  ConfusionMatrix cm(2);
  cm.add(0, 0, 3);
  cm.add(0, 1, 1);
  cm.add(1, 0, 1);
  cm.add(1, 1, 3);
  const auto s = macro_scores(cm);
  EXPECT_NEAR(s.accuracy, 0.75, kTol);
  EXPECT_NEAR(s.macro_precision, 0.75, kTol);
  EXPECT_NEAR(s.macro_recall, 0.75, kTol);
  EXPECT_NEAR(s.macro_f1, 0.75, kTol);
  EXPECT_TRUE(s.zero_division_classes.empty());
}

TEST(Macro, ZeroDivisionCountsAsZero) {
  ConfusionMatrix cm(3);
  cm.add(0, 0, 2);
  cm.add(1, 0, 2);
  const auto s = macro_scores(cm);
  EXPECT_NEAR(s.accuracy, 0.5, kTol);
  EXPECT_NEAR(s.macro_precision, 0.5 / 3.0, kTol);
  EXPECT_NEAR(s.macro_recall, 1.0 / 3.0, kTol);
  EXPECT_EQ(s.zero_division_classes, (std::vector<std::size_t>{1, 2}));
}

TEST(Macro, MatchesBruteForce) {
  std::mt19937_64 rng(17);
  for (std::size_t classes : {2u, 3u, 10u}) {
    for (int t = 0; t < 60; ++t) {
      const std::size_t n = 1 + rng() % 80;
      std::vector<std::size_t> truth(n), pred(n);
      ConfusionMatrix cm(classes);
      for (std::size_t i = 0; i < n; ++i) {
        truth[i] = rng() % classes;
        pred[i] = rng() % 4 == 0 ? rng() % classes : truth[i];
        cm.add(truth[i], pred[i]);
      }
      const auto got = macro_scores(cm);
      const auto want = oracle::macro(truth, pred, classes);
      EXPECT_NEAR(got.accuracy, want.accuracy, kTol);
      EXPECT_NEAR(got.macro_precision, want.precision, kTol);
      EXPECT_NEAR(got.macro_recall, want.recall, kTol);
      EXPECT_NEAR(got.macro_f1, want.f1, kTol);
    }
  }
}

TEST(ConfusionMatrix, RowsAreTruth) {
  GroundTruthTable truth;
  truth.labels = {{"a", 0}, {"b", 1}, {"c", 1}};
  const std::vector<PredictionRecord> preds{validate_prediction("a", {1, 0}, 0, 2),
                                            validate_prediction("b", {1, 0}, 0, 2),
                                            validate_prediction("c", {0, 1}, 1, 2)};
  const auto cm = confusion_matrix(preds, truth, 2);
  EXPECT_EQ(cm.at(0, 0), 1u);
  EXPECT_EQ(cm.at(1, 0), 1u);
  EXPECT_EQ(cm.at(1, 1), 1u);
  EXPECT_EQ(cm.at(0, 1), 0u);
  EXPECT_EQ(cm.total(), 3u);
}

TEST(Invariants, RandomPairs) {
  std::mt19937_64 rng(23);
  for (int t = 0; t < 500; ++t) {
    const std::size_t n = 1 + rng() % 64;
    const auto p = grid_values(rng, n), q = grid_values(rng, n);
    EXPECT_EQ(mad(p, p), 0.0);
    EXPECT_EQ(msd(p, p), 0.0);
    EXPECT_EQ(mad(p, q), mad(q, p));
    EXPECT_EQ(msd(p, q), msd(q, p));
    EXPECT_GE(msd(p, q) + kTol, mad(p, q) * mad(p, q));
    EXPECT_LE(msd(p, q), mad(p, q) + kTol);
    for (double y : {5.0, 10.0, 20.0, 50.0}) {
      const double o = overlap_rate(p, q, y);
      EXPECT_GE(o, 0.0);
      EXPECT_LE(o, 1.0);
      EXPECT_EQ(o, overlap_rate(q, p, y));
      EXPECT_EQ(overlap_rate(p, p, y), 1.0);
    }
    if (n >= 2) {
      for (const auto& r : {pearson(p, q), spearman(p, q)}) {
        if (!r.defined()) continue;
        EXPECT_GE(*r.value, -1.0);
        EXPECT_LE(*r.value, 1.0);
      }
      EXPECT_EQ(pearson(p, q), pearson(q, p));
    }
  }
}

TEST(Invariants, KldSelfIsNearZeroAndNonNegativeWithoutEpsilon) {
  std::mt19937_64 rng(29);
  for (int t = 0; t < 300; ++t) {
    const std::size_t c = 2 + rng() % 9;
    const auto p = grid_distribution(rng, c), q = grid_distribution(rng, c);
    EXPECT_NEAR(class_kld(p, p, 0.0), 0.0, kTol);
    EXPECT_NEAR(class_kld(p, p, 1e-10), 0.0, 1e-9);
    EXPECT_GE(class_kld(p, q, 0.0), -kTol);
  }
}

TEST(OracleEquivalence, ExhaustiveSmallVectors) {
  const std::vector<double> coarse{0.0, 0.5, 1.0};
  const std::vector<double> fine{0.0, 0.25, 0.5, 0.75, 1.0};
  struct Case {
    std::size_t n;
    const std::vector<double>* levels;
    std::size_t stride;
  };
  const Case cases[] = {{1, &fine, 1}, {2, &fine, 1}, {3, &fine, 1}, {4, &coarse, 1},
                        {4, &fine, 7}, {5, &fine, 37}, {6, &fine, 131}};
  for (const auto& c : cases) {
    for_each_vector(c.n, *c.levels, c.stride, [&](const std::vector<double>& p) {
      for_each_vector(c.n, *c.levels, c.stride, [&](const std::vector<double>& q) {
        ASSERT_NEAR(mad(p, q), oracle::mad(p, q), kTol);
        ASSERT_NEAR(msd(p, q), oracle::msd(p, q), kTol);
        for (double y : {5.0, 20.0, 50.0}) ASSERT_NEAR(overlap_rate(p, q, y), oracle::overlap(p, q, y), kTol);
        if (c.n >= 2) {
          expect_same(pearson(p, q), oracle::pearson(p, q));
          expect_same(spearman(p, q), oracle::spearman(p, q));
        }
      });
    });
  }
}

TEST(OracleEquivalence, RankTransform) {
  std::mt19937_64 rng(31);
  for (int t = 0; t < 300; ++t) {
    const auto v = grid_values(rng, 1 + rng() % 100);
    EXPECT_EQ(rank_transform(v).ranks, oracle::ranks(v));
  }
}

TEST(OracleEquivalence, ClassKld) {
  std::mt19937_64 rng(37);
  for (int t = 0; t < 500; ++t) {
    const std::size_t c = 2 + rng() % 9;
    const auto p = grid_distribution(rng, c), q = grid_distribution(rng, c);
    for (double eps : {0.0, 1e-10, 1e-3}) EXPECT_NEAR(class_kld(p, q, eps), oracle::kld(p, q, eps), 1e-11);
  }
}

TEST(EvaluateMetric, CorrelationOnSinglePixelIsUndefined) {
  const Cam a = camdiff::testing::cam_of(1, 1, {0.3});
  const auto pr = validate_prediction("x", {1.0}, 0, 1);
  const auto v = evaluate_metric(MetricId::make(MetricKind::pearson), a, a, pr, pr);
  EXPECT_EQ(v.reason, UndefinedReason::too_few_pixels);
  EXPECT_EQ(*evaluate_metric(MetricId::make(MetricKind::mad), a, a, pr, pr).value, 0.0);
}

TEST(EvaluateMetric, ShapeMismatchThrows) {
  const Cam a = camdiff::testing::cam_of(1, 2, {0.3, 0.4});
  const Cam b = camdiff::testing::cam_of(2, 1, {0.3, 0.4});
  const auto pr = validate_prediction("x", {1.0}, 0, 1);
  EXPECT_THROW(evaluate_metric(MetricId::make(MetricKind::mad), a, b, pr, pr), Error);
}
