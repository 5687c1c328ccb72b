// Metric-matrix fan-out over (model, image) pairs.
//
// compute_metric_matrices() is the OpenMP kernel used by the pipeline;
// compute_metric_matrices_serial() is the plain reference loop it is tested
// against. Every (model, image) slot is computed independently and written to
// a preallocated position, so both produce bit-identical output for any
// worker count.

#pragma once

#include <span>
#include <vector>

#include "camdiff/interchange.hpp"
#include "camdiff/types.hpp"

namespace camdiff {

/// me(s_{model,i}, s_{B,i}) for every image i of the manifest.
MetricMatrix compute_metric_matrix(const Dataset& dataset, const MetricId& metric, const ModelId& model);

/// Result index = metric_index * models.size() + model_index.
std::vector<MetricMatrix> compute_metric_matrices(const Dataset& dataset, std::span<const MetricId> metrics,
                                                  std::span<const ModelId> models, int workers);

std::vector<MetricMatrix> compute_metric_matrices_serial(const Dataset& dataset, std::span<const MetricId> metrics,
                                                         std::span<const ModelId> models);

}  // namespace camdiff
