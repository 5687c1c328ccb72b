// End-to-end pipeline: validate, compute, aggregate, analyze and write the
// report bundle.
//
// Bundle layout under the output directory (stable names; <metric> is
// MetricId::file_stem()):
//
//   index.json                              links every artifact below
//   matrices/<metric>/<aug>__<seed>.csv     image_id,value,reason
//   aggregated/<metric>/<aug>.csv           image_id,value,contributing_seeds,seed_count
//   boxplots/<metric>.{csv,svg}             one row / box per augmentation
//   correlation/<metric>.{csv,md,svg}       augmentation x augmentation matrix
//   frequency/{strongest,weakest}.{csv,md}  first,second,count
//   segmentation/counts.csv                 per (aug, seed) segment sizes
//   segmentation/<metric>.csv               per (aug, seed, segment) boxplot stats
//   extremes/<metric>.csv                   statistic,image_id,value
//   performance/models.csv                  macro scores per model
//   performance/augmentations.csv           seed-averaged macro scores
//   performance/<score>.svg, performance.md

#pragma once

#include <filesystem>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "camdiff/analysis.hpp"
#include "camdiff/interchange.hpp"
#include "camdiff/types.hpp"

namespace camdiff {

enum class OutputFormat { csv, md, svg };

/// mad, msd, pearson, spearman, overlap_rate@{20,10,5}, class_kld@1e-10.
std::vector<MetricId> default_metrics();
std::vector<MetricId> parse_metric_list(std::string_view comma_separated);
std::set<OutputFormat> parse_formats(std::string_view comma_separated);
int default_workers();

struct RunConfig {
  std::filesystem::path manifest_path;
  std::vector<MetricId> metrics = default_metrics();
  std::size_t k = 4;
  CorrelationMethod correlation = CorrelationMethod::pearson;
  Deletion deletion = Deletion::pairwise;
  int workers = default_workers();
  std::filesystem::path out_dir;
  std::set<OutputFormat> formats = {OutputFormat::csv, OutputFormat::md, OutputFormat::svg};

  /// Throws Error on an empty metric list, k = 0 or workers < 1.
  void check() const;
};

/// Overlays the keys of a JSON config document onto `base`. Keys: manifest,
/// out, metrics, k, corr, deletion, epsilon, workers, formats.
RunConfig apply_config_json(std::string_view json_text, RunConfig base);
/// Replaces the parameter of every class_kld metric.
void set_kld_epsilon(RunConfig& config, double epsilon);

/// The dataset failed validation; carries the report.
class DatasetInvalid : public Error {
 public:
  explicit DatasetInvalid(ValidationReport report);
  const ValidationReport& report() const noexcept { return report_; }

 private:
  ValidationReport report_;
};

struct RunSummary {
  std::size_t metric_matrices = 0;
  std::size_t correlation_maps = 0;
  std::size_t frequency_tables = 0;
  std::size_t effective_k = 0;
  std::vector<std::string> notes;
};

/// Runs the whole analysis and writes the bundle to config.out_dir.
RunSummary run_pipeline(const RunConfig& config);

struct ExtremesResult {
  ExtremeImage image;
  std::filesystem::path grid_svg;
  std::filesystem::path index_json;
};

/// Finds the extreme image for `metric` and writes
/// extremes_<metric>_<statistic>.svg (baseline plus every augmented model's
/// CAM) and the matching .json index of metric values under config.out_dir.
ExtremesResult run_extremes(const RunConfig& config, const MetricId& metric, ExtremeStatistic statistic);

}  // namespace camdiff
