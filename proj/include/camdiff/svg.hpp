// Deterministic SVG charts: boxplots, correlation heatmaps, bar charts and
// CAM grids. Identical input always yields identical bytes.

#pragma once

#include <span>
#include <string>
#include <string_view>
#include <utility>

#include "camdiff/analysis.hpp"
#include "camdiff/types.hpp"

namespace camdiff {

std::string xml_escape(std::string_view text);

std::string render_boxplot(std::span<const std::pair<std::string, BoxplotStats>> boxes, std::string_view title,
                           std::string_view y_label = "metric value");

std::string render_heatmap(const CorrelationMap& map, std::string_view title);

std::string render_bars(std::span<const std::pair<std::string, double>> bars, std::string_view metric_name);

/// One labeled heatmap cell per CAM. Maps larger than 64 pixels per side are
/// block-averaged down first.
std::string render_cam_grid(std::span<const std::pair<std::string, const Cam*>> cells, std::string_view title);

}  // namespace camdiff
