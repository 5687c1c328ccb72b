// Dataset interchange: manifest.json, .camf activation maps and the
// prediction / ground-truth CSV tables.
//
// CAM file layout (all little-endian):
//
//   offset  size  field
//   0       4     magic "CAMF"
//   4       2     u16 version (1)
//   6       4     u32 height
//   10      4     u32 width
//   14      4*N   f32 values, row-major, N = height * width

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "camdiff/types.hpp"

namespace camdiff {

inline constexpr std::uint16_t kCamFormatVersion = 1;
inline constexpr std::size_t kCamHeaderBytes = 14;
inline constexpr std::size_t kMaxCamPixels = std::size_t{1} << 28;

std::vector<std::uint8_t> encode_cam(const Cam& cam);
Cam decode_cam(std::span<const std::uint8_t> bytes);

void write_cam(const Cam& cam, const std::filesystem::path& path);
Cam read_cam(const std::filesystem::path& path);

struct ModelEntry {
  ModelId model;
  std::string cam_dir;           // relative to the manifest directory
  std::string predictions_path;  // relative to the manifest directory
};

struct DatasetManifest {
  std::string dataset_name;
  std::vector<std::string> class_names;
  std::vector<std::string> image_ids;
  std::string ground_truth_path;
  std::vector<ModelEntry> models;
  /// Free-form metadata object, kept as serialized JSON ("{}" when absent).
  std::string metadata_json = "{}";
  /// Directory the relative paths resolve against; not serialized.
  std::filesystem::path base_dir;

  std::size_t class_count() const noexcept { return class_names.size(); }
  const ModelEntry& baseline() const;
  const ModelEntry* find(const ModelId& id) const;
  /// Augmentation names in order of first appearance.
  std::vector<std::string> augmentations() const;
  /// Seed labels, sorted.
  std::vector<std::string> seeds() const;
  /// Augmented models of one augmentation, ordered by seed label.
  std::vector<ModelId> models_of(const std::string& augmentation) const;
  /// All augmented models, augmentation-major then seed label.
  std::vector<ModelId> augmented_models() const;

  std::filesystem::path cam_path(const ModelEntry& entry, const std::string& image_id) const;
  std::filesystem::path resolve(const std::string& relative) const;

  bool operator==(const DatasetManifest& other) const;
};

/// Parses and structurally checks a manifest; throws ParseError. File
/// existence is left to validate_dataset().
DatasetManifest parse_manifest(std::string_view json_text, const std::filesystem::path& base_dir);
DatasetManifest read_manifest(const std::filesystem::path& path);
std::string manifest_to_json(const DatasetManifest& manifest);
void write_manifest(const DatasetManifest& manifest, const std::filesystem::path& path);

/// Columns image_id, predicted_class, p_0 ... p_{C-1}; predicted_class may be
/// empty, in which case it is derived.
std::vector<PredictionRecord> parse_predictions(std::string_view csv_text, std::size_t class_count);
std::vector<PredictionRecord> read_predictions(const std::filesystem::path& path, std::size_t class_count);
void write_predictions(std::span<const PredictionRecord> records, std::size_t class_count,
                       const std::filesystem::path& path);

/// Columns image_id, label.
GroundTruthTable parse_ground_truth(std::string_view csv_text, std::size_t class_count,
                                    std::vector<std::string>* order = nullptr);
GroundTruthTable read_ground_truth(const std::filesystem::path& path, std::size_t class_count,
                                   std::vector<std::string>* order = nullptr);
void write_ground_truth(std::span<const std::string> image_ids, std::span<const std::size_t> labels,
                        const std::filesystem::path& path);

enum class IssueKind {
  missing_cam,
  unreadable_cam,
  dimension_disagreement,
  missing_predictions,
  invalid_predictions,
  prediction_gap,
  unexpected_prediction,
  missing_ground_truth,
  invalid_ground_truth,
  ground_truth_gap,
};

std::string_view to_string(IssueKind kind);

struct ValidationIssue {
  IssueKind kind;
  std::string model;  // model label, empty for dataset-level issues
  std::string image_id;
  std::string detail;

  std::string describe() const;
};

struct ValidationReport {
  std::vector<ValidationIssue> issues;
  bool empty() const noexcept { return issues.empty(); }
};

/// Content problems are collected into the report; only I/O failures throw.
ValidationReport validate_dataset(const DatasetManifest& manifest);

struct LoadedModel {
  ModelId id;
  std::vector<Cam> cams;                       // aligned with manifest.image_ids
  std::vector<PredictionRecord> predictions;   // aligned with manifest.image_ids
};

/// Fully materialized dataset.
struct Dataset {
  DatasetManifest manifest;
  std::vector<LoadedModel> models;  // manifest order
  GroundTruthTable truth;

  const LoadedModel& model(const ModelId& id) const;
  const LoadedModel& baseline() const { return model(ModelId::baseline()); }
};

/// Loads every CAM and prediction table, in parallel over models when
/// `workers` > 1. Throws on any missing or malformed file.
Dataset load_dataset(const DatasetManifest& manifest, int workers = 1);

struct SynthSpec {
  std::string dataset_name = "synthetic";
  std::size_t images = 200;
  std::size_t size = 32;
  std::size_t classes = 10;
  /// Augmentation names grouped into behavior clusters.
  std::vector<std::vector<std::string>> clusters;
  std::size_t seeds = 3;
  std::uint64_t master_seed = 42;
  /// Blend weight of the cluster perturbation field (0 = copies of baseline).
  double perturbation = 0.4;
  /// Amplitude of the per-model noise field, relative to the blend.
  double noise = 0.05;
  /// Probability an augmented prediction keeps the baseline's class.
  double agreement = 0.8;
  /// Probability the baseline predicts the ground-truth class.
  double baseline_accuracy = 0.7;
};

SynthSpec parse_synth_spec(std::string_view json_text);
SynthSpec read_synth_spec(const std::filesystem::path& path);

/// Writes a complete dataset under `out_dir` and returns its manifest. Output
/// depends only on `spec`.
DatasetManifest synth_dataset(const SynthSpec& spec, const std::filesystem::path& out_dir, int workers = 1);

}  // namespace camdiff
