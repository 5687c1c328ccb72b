// Serial reference vs OpenMP fan-out of the metric-matrix kernel.

#include <filesystem>

#include <benchmark/benchmark.h>
#include <unistd.h>

#include "camdiff/kernels.hpp"
#include "camdiff/report.hpp"

namespace {

const camdiff::Dataset& dataset() {
  static const camdiff::Dataset ds = [] {
    camdiff::SynthSpec spec;
    spec.images = 100;
    spec.size = 32;
    spec.clusters = {{"a", "b"}, {"c", "d"}};
    spec.seeds = 2;
    const auto dir = std::filesystem::temp_directory_path() / ("camdiff_bench_" + std::to_string(::getpid()));
    auto loaded = camdiff::load_dataset(camdiff::synth_dataset(spec, dir));
    std::filesystem::remove_all(dir);
    return loaded;
  }();
  return ds;
}

void BM_Serial(benchmark::State& state) {
  const auto& ds = dataset();
  const auto metrics = camdiff::default_metrics();
  const auto models = ds.manifest.augmented_models();
  for (auto _ : state) benchmark::DoNotOptimize(camdiff::compute_metric_matrices_serial(ds, metrics, models));
}
BENCHMARK(BM_Serial)->Unit(benchmark::kMillisecond);

void BM_Parallel(benchmark::State& state) {
  const auto& ds = dataset();
  const auto metrics = camdiff::default_metrics();
  const auto models = ds.manifest.augmented_models();
  const int workers = static_cast<int>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(camdiff::compute_metric_matrices(ds, metrics, models, workers));
}
BENCHMARK(BM_Parallel)->Arg(1)->Arg(2)->Arg(4)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
