#include "camdiff/kernels.hpp"

#include <algorithm>
#include <exception>
#include <mutex>

#include <fmt/format.h>

#include "camdiff/metrics.hpp"

namespace camdiff {
namespace {

const LoadedModel& augmented_model(const Dataset& dataset, const ModelId& model) {
  if (model.is_baseline()) throw Error("metric matrix: model must be augmented");
  return dataset.model(model);
}

std::vector<MetricMatrix> empty_matrices(const Dataset& dataset, std::span<const MetricId> metrics,
                                         std::span<const ModelId> models) {
  std::vector<MetricMatrix> out;
  out.reserve(metrics.size() * models.size());
  for (const auto& metric : metrics) {
    for (const auto& model : models) {
      augmented_model(dataset, model);
      out.push_back(MetricMatrix{metric, model, dataset.manifest.image_ids,
                                 std::vector<MetricValue>(dataset.manifest.image_ids.size())});
    }
  }
  return out;
}

}  // namespace

MetricMatrix compute_metric_matrix(const Dataset& dataset, const MetricId& metric, const ModelId& model) {
  const auto& aug = augmented_model(dataset, model);
  const auto& base = dataset.baseline();
  MetricMatrix out{metric, model, dataset.manifest.image_ids, {}};
  out.values.reserve(out.image_ids.size());
  for (std::size_t i = 0; i < out.image_ids.size(); ++i) {
    out.values.push_back(evaluate_metric(metric, aug.cams[i], base.cams[i], aug.predictions[i], base.predictions[i]));
  }
  return out;
}

std::vector<MetricMatrix> compute_metric_matrices_serial(const Dataset& dataset, std::span<const MetricId> metrics,
                                                         std::span<const ModelId> models) {
  std::vector<MetricMatrix> out;
  out.reserve(metrics.size() * models.size());
  for (const auto& metric : metrics) {
    for (const auto& model : models) out.push_back(compute_metric_matrix(dataset, metric, model));
  }
  return out;
}

std::vector<MetricMatrix> compute_metric_matrices(const Dataset& dataset, std::span<const MetricId> metrics,
                                                  std::span<const ModelId> models, int workers) {
  auto out = empty_matrices(dataset, metrics, models);
  const auto& base = dataset.baseline();
  std::vector<const LoadedModel*> loaded;
  for (const auto& model : models) loaded.push_back(&dataset.model(model));

  const std::size_t n_images = dataset.manifest.image_ids.size();
  const auto n_jobs = static_cast<std::ptrdiff_t>(models.size() * n_images);
  std::exception_ptr failure;
  std::mutex failure_mutex;

  // One job per (model, image); all metrics of that pair share the loaded maps.
#pragma omp parallel for schedule(dynamic, 16) num_threads(std::max(workers, 1))
  for (std::ptrdiff_t job = 0; job < n_jobs; ++job) {
    const auto mi = static_cast<std::size_t>(job) / n_images;
    const auto ii = static_cast<std::size_t>(job) % n_images;
    try {
      const LoadedModel& aug = *loaded[mi];
      for (std::size_t k = 0; k < metrics.size(); ++k) {
        out[k * models.size() + mi].values[ii] = evaluate_metric(
            metrics[k], aug.cams[ii], base.cams[ii], aug.predictions[ii], base.predictions[ii]);
      }
    } catch (...) {
      std::lock_guard lock(failure_mutex);
      if (!failure) failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);
  return out;
}

}  // namespace camdiff
