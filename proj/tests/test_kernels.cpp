#include <cstring>

#include <gtest/gtest.h>

#include "camdiff/kernels.hpp"
#include "camdiff/metrics.hpp"
#include "camdiff/report.hpp"
#include "test_util.hpp"

using namespace camdiff;
using camdiff::testing::TempDir;
using camdiff::testing::small_spec;

namespace {

bool bit_equal(const MetricValue& a, const MetricValue& b) {
  if (a.reason != b.reason || a.defined() != b.defined()) return false;
  return !a.defined() || std::memcmp(&*a.value, &*b.value, sizeof(double)) == 0;
}

}  // namespace

TEST(Kernels, ParallelMatchesSerialBitForBit) {
  TempDir dir;
  const auto ds = load_dataset(synth_dataset(small_spec(), dir.path()));
  const auto metrics = default_metrics();
  const auto models = ds.manifest.augmented_models();
  const auto want = compute_metric_matrices_serial(ds, metrics, models);
  ASSERT_EQ(want.size(), metrics.size() * models.size());
  for (int workers : {1, 2, 3, 8}) {
    const auto got = compute_metric_matrices(ds, metrics, models, workers);
    ASSERT_EQ(got.size(), want.size());
    for (std::size_t m = 0; m < got.size(); ++m) {
      EXPECT_EQ(got[m].metric, want[m].metric);
      EXPECT_EQ(got[m].model, want[m].model);
      EXPECT_EQ(got[m].image_ids, want[m].image_ids);
      for (std::size_t i = 0; i < got[m].values.size(); ++i) {
        ASSERT_TRUE(bit_equal(got[m].values[i], want[m].values[i])) << "workers=" << workers << " matrix " << m;
      }
    }
  }
}

TEST(Kernels, LayoutIsMetricMajor) {
  TempDir dir;
  const auto ds = load_dataset(synth_dataset(small_spec(), dir.path()));
  const std::vector<MetricId> metrics{MetricId::make(MetricKind::msd), MetricId::make(MetricKind::pearson)};
  const auto models = ds.manifest.augmented_models();
  const auto got = compute_metric_matrices(ds, metrics, models, 2);
  for (std::size_t m = 0; m < metrics.size(); ++m) {
    for (std::size_t j = 0; j < models.size(); ++j) {
      const auto& mm = got[m * models.size() + j];
      EXPECT_EQ(mm.metric, metrics[m]);
      EXPECT_EQ(mm.model, models[j]);
      const auto single = compute_metric_matrix(ds, metrics[m], models[j]);
      EXPECT_EQ(mm.values, single.values);
    }
  }
}

TEST(Kernels, MatchesDirectEvaluation) {
  TempDir dir;
  const auto ds = load_dataset(synth_dataset(small_spec(), dir.path()));
  const auto model = ModelId::augmented("augC", "s2");
  const auto metric = MetricId::make(MetricKind::overlap_rate, 10);
  const auto mm = compute_metric_matrix(ds, metric, model);
  const auto& a = ds.model(model);
  const auto& b = ds.baseline();
  for (std::size_t i = 0; i < mm.values.size(); ++i) {
    EXPECT_EQ(*mm.values[i].value, overlap_rate(a.cams[i], b.cams[i], 10));
  }
}
