#include "camdiff/interchange.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <exception>
#include <map>
#include <mutex>
#include <set>
#include <unordered_set>

#include <fmt/format.h>
#include <json.hpp>

#include "text_io.hpp"

namespace camdiff {

namespace fs = std::filesystem;
using detail::format_real;

// ---------------------------------------------------------------- CAM files

namespace {

constexpr std::uint8_t kMagic[4] = {'C', 'A', 'M', 'F'};

std::uint32_t get_u32(std::span<const std::uint8_t> b, std::size_t at) {
  return static_cast<std::uint32_t>(b[at]) | static_cast<std::uint32_t>(b[at + 1]) << 8 |
         static_cast<std::uint32_t>(b[at + 2]) << 16 | static_cast<std::uint32_t>(b[at + 3]) << 24;
}

}  // namespace

std::vector<std::uint8_t> encode_cam(const Cam& cam) {
  if (cam.height() > UINT32_MAX || cam.width() > UINT32_MAX) throw Error("camf: dimension overflow");
  std::vector<std::uint8_t> out(kCamHeaderBytes + 4 * cam.size());
  std::memcpy(out.data(), kMagic, 4);
  std::size_t at = 4;
  auto put = [&](std::uint32_t v, int bytes) {
    for (int b = 0; b < bytes; ++b) out[at++] = static_cast<std::uint8_t>(v >> (8 * b));
  };
  put(kCamFormatVersion, 2);
  put(static_cast<std::uint32_t>(cam.height()), 4);
  put(static_cast<std::uint32_t>(cam.width()), 4);
  for (double v : cam.values()) put(std::bit_cast<std::uint32_t>(static_cast<float>(v)), 4);
  return out;
}

Cam decode_cam(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < kCamHeaderBytes) throw Error("camf: truncated header");
  if (std::memcmp(bytes.data(), kMagic, 4) != 0) throw Error("camf: bad magic");
  const auto version = static_cast<std::uint16_t>(bytes[4] | bytes[5] << 8);
  if (version != kCamFormatVersion) throw Error(fmt::format("camf: version mismatch ({})", version));
  const std::uint64_t height = get_u32(bytes, 6);
  const std::uint64_t width = get_u32(bytes, 10);
  if (height == 0 || width == 0) throw Error("camf: empty dimensions");
  if (height * width > kMaxCamPixels) throw Error("camf: dimension overflow");
  const std::size_t n = static_cast<std::size_t>(height * width);
  const std::size_t expected = kCamHeaderBytes + 4 * n;
  if (bytes.size() < expected) throw Error("camf: truncated payload");
  if (bytes.size() > expected) throw Error("camf: trailing bytes after payload");

  std::vector<double> values(n);
  for (std::size_t j = 0; j < n; ++j) {
    values[j] = static_cast<double>(std::bit_cast<float>(get_u32(bytes, kCamHeaderBytes + 4 * j)));
  }
  return validate_cam(static_cast<std::size_t>(height), static_cast<std::size_t>(width), values);
}

void write_cam(const Cam& cam, const fs::path& path) { detail::write_binary_file(path, encode_cam(cam)); }

Cam read_cam(const fs::path& path) {
  const auto bytes = detail::read_binary_file(path);
  try {
    return decode_cam(bytes);
  } catch (const Error& e) {
    throw Error(fmt::format("{}: {}", path.string(), e.what()));
  }
}

// ----------------------------------------------------------------- manifest

const ModelEntry& DatasetManifest::baseline() const {
  for (const auto& m : models) {
    if (m.model.is_baseline()) return m;
  }
  throw Error("manifest: no baseline model");
}

const ModelEntry* DatasetManifest::find(const ModelId& id) const {
  for (const auto& m : models) {
    if (m.model == id) return &m;
  }
  return nullptr;
}

std::vector<std::string> DatasetManifest::augmentations() const {
  std::vector<std::string> out;
  for (const auto& m : models) {
    if (m.model.is_baseline()) continue;
    if (std::find(out.begin(), out.end(), *m.model.augmentation) == out.end()) {
      out.push_back(*m.model.augmentation);
    }
  }
  return out;
}

std::vector<std::string> DatasetManifest::seeds() const {
  std::set<std::string> s;
  for (const auto& m : models) {
    if (!m.model.is_baseline()) s.insert(*m.model.seed);
  }
  return {s.begin(), s.end()};
}

std::vector<ModelId> DatasetManifest::models_of(const std::string& augmentation) const {
  std::vector<ModelId> out;
  for (const auto& m : models) {
    if (!m.model.is_baseline() && *m.model.augmentation == augmentation) out.push_back(m.model);
  }
  std::sort(out.begin(), out.end(), [](const ModelId& a, const ModelId& b) { return *a.seed < *b.seed; });
  return out;
}

std::vector<ModelId> DatasetManifest::augmented_models() const {
  std::vector<ModelId> out;
  for (const auto& a : augmentations()) {
    auto ms = models_of(a);
    out.insert(out.end(), ms.begin(), ms.end());
  }
  return out;
}

fs::path DatasetManifest::cam_path(const ModelEntry& entry, const std::string& image_id) const {
  return base_dir / entry.cam_dir / (image_id + ".camf");
}

fs::path DatasetManifest::resolve(const std::string& relative) const { return base_dir / relative; }

bool DatasetManifest::operator==(const DatasetManifest& o) const {
  auto same_models = [&] {
    if (models.size() != o.models.size()) return false;
    for (std::size_t i = 0; i < models.size(); ++i) {
      const auto& a = models[i];
      const auto& b = o.models[i];
      if (a.model != b.model || a.cam_dir != b.cam_dir || a.predictions_path != b.predictions_path) {
        return false;
      }
    }
    return true;
  };
  return dataset_name == o.dataset_name && class_names == o.class_names && image_ids == o.image_ids &&
         ground_truth_path == o.ground_truth_path && metadata_json == o.metadata_json && same_models();
}

namespace {

using nlohmann::json;

template <typename T>
T required(const json& obj, const char* key, std::string_view where) {
  if (!obj.is_object() || !obj.contains(key)) {
    throw ParseError(fmt::format("manifest: {} is missing '{}'", where, key));
  }
  try {
    return obj.at(key).get<T>();
  } catch (const json::exception&) {
    throw ParseError(fmt::format("manifest: {} has a malformed '{}'", where, key));
  }
}

bool is_relative_path(const std::string& p) { return !p.empty() && fs::path(p).is_relative(); }

}  // namespace

DatasetManifest parse_manifest(std::string_view json_text, const fs::path& base_dir) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ParseError(fmt::format("manifest: parse error: {}", e.what()));
  }
  if (!doc.is_object()) throw ParseError("manifest: top level must be an object");

  DatasetManifest m;
  m.base_dir = base_dir;
  m.dataset_name = required<std::string>(doc, "dataset_name", "manifest");
  m.class_names = required<std::vector<std::string>>(doc, "class_names", "manifest");
  m.image_ids = required<std::vector<std::string>>(doc, "image_ids", "manifest");
  m.ground_truth_path = required<std::string>(doc, "ground_truth", "manifest");
  if (doc.contains("metadata")) m.metadata_json = doc["metadata"].dump();

  if (m.class_names.empty()) throw ParseError("manifest: zero classes");
  if (m.image_ids.empty()) throw ParseError("manifest: zero images");
  {
    std::unordered_set<std::string> seen;
    for (const auto& id : m.image_ids) {
      if (id.empty() || id.find_first_of(",/\\\n") != std::string::npos) {
        throw ParseError(fmt::format("manifest: invalid image id '{}'", id));
      }
      if (!seen.insert(id).second) throw ParseError(fmt::format("manifest: duplicate image id '{}'", id));
    }
  }
  if (!is_relative_path(m.ground_truth_path)) throw ParseError("manifest: ground_truth must be a relative path");

  if (!doc.contains("models") || !doc["models"].is_array()) throw ParseError("manifest: missing 'models' array");
  std::size_t baselines = 0;
  for (const auto& entry : doc["models"]) {
    const auto kind = required<std::string>(entry, "kind", "model entry");
    ModelEntry me;
    if (kind == "baseline") {
      if (entry.contains("augmentation") || entry.contains("seed")) {
        throw ParseError("manifest: baseline entry must not carry augmentation or seed");
      }
      me.model = ModelId::baseline();
      if (++baselines > 1) throw ParseError("manifest: duplicate baseline");
    } else if (kind == "augmented") {
      auto aug = required<std::string>(entry, "augmentation", "augmented entry");
      auto seed = required<std::string>(entry, "seed", "augmented entry");
      if (aug.empty() || seed.empty()) throw ParseError("manifest: empty augmentation or seed");
      me.model = ModelId::augmented(std::move(aug), std::move(seed));
    } else {
      throw ParseError(fmt::format("manifest: unknown model kind '{}'", kind));
    }
    me.cam_dir = required<std::string>(entry, "cam_dir", "model entry");
    me.predictions_path = required<std::string>(entry, "predictions", "model entry");
    if (!is_relative_path(me.cam_dir) || !is_relative_path(me.predictions_path)) {
      throw ParseError(fmt::format("manifest: paths of {} must be relative", me.model.label()));
    }
    if (m.find(me.model)) throw ParseError(fmt::format("manifest: duplicate model id {}", me.model.label()));
    m.models.push_back(std::move(me));
  }
  if (baselines == 0) throw ParseError("manifest: missing baseline");

  const auto augs = m.augmentations();
  const auto seeds = m.seeds();
  if (m.models.size() - 1 != augs.size() * seeds.size()) {
    throw ParseError(fmt::format("manifest: incomplete grid, {} augmented models for {} augmentations x {} seeds",
                                 m.models.size() - 1, augs.size(), seeds.size()));
  }
  return m;
}

DatasetManifest read_manifest(const fs::path& path) {
  std::string text;
  try {
    text = detail::read_text_file(path);
  } catch (const Error& e) {
    throw ParseError(e.what());
  }
  return parse_manifest(text, path.parent_path());
}

std::string manifest_to_json(const DatasetManifest& m) {
  nlohmann::ordered_json doc;
  doc["dataset_name"] = m.dataset_name;
  doc["class_names"] = m.class_names;
  doc["image_ids"] = m.image_ids;
  doc["ground_truth"] = m.ground_truth_path;
  auto models = nlohmann::ordered_json::array();
  for (const auto& me : m.models) {
    nlohmann::ordered_json e;
    e["kind"] = me.model.is_baseline() ? "baseline" : "augmented";
    if (!me.model.is_baseline()) {
      e["augmentation"] = *me.model.augmentation;
      e["seed"] = *me.model.seed;
    }
    e["cam_dir"] = me.cam_dir;
    e["predictions"] = me.predictions_path;
    models.push_back(std::move(e));
  }
  doc["models"] = std::move(models);
  const auto metadata = nlohmann::ordered_json::parse(m.metadata_json);
  if (!metadata.empty()) doc["metadata"] = metadata;
  return doc.dump(2) + "\n";
}

void write_manifest(const DatasetManifest& m, const fs::path& path) {
  detail::write_text_file(path, manifest_to_json(m));
}

// --------------------------------------------------------------- CSV tables

std::vector<PredictionRecord> parse_predictions(std::string_view csv_text, std::size_t class_count) {
  const auto lines = detail::split_lines(csv_text);
  if (lines.empty()) throw Error("predictions: missing header row");
  const auto header = detail::split_fields(lines.front());
  if (header.size() != 2 + class_count || header[0] != "image_id" || header[1] != "predicted_class") {
    throw Error(fmt::format("predictions: header must be image_id,predicted_class,p_0..p_{}", class_count - 1));
  }
  std::vector<PredictionRecord> out;
  std::unordered_set<std::string> seen;
  for (std::size_t row = 1; row < lines.size(); ++row) {
    const auto fields = detail::split_fields(lines[row]);
    const std::string where = fmt::format("predictions row {}", row);
    if (fields.size() != 2 + class_count) {
      throw Error(fmt::format("{}: row length {} != {}", where, fields.size(), 2 + class_count));
    }
    std::string id(fields[0]);
    if (id.empty()) throw Error(fmt::format("{}: empty image_id", where));
    if (!seen.insert(id).second) throw Error(fmt::format("{}: duplicate image_id '{}'", where, id));
    std::optional<std::size_t> predicted;
    if (!fields[1].empty()) predicted = detail::parse_index(fields[1], where);
    std::vector<double> probs(class_count);
    for (std::size_t c = 0; c < class_count; ++c) probs[c] = detail::parse_double(fields[2 + c], where);
    out.push_back(validate_prediction(std::move(id), std::move(probs), predicted, class_count));
  }
  return out;
}

std::vector<PredictionRecord> read_predictions(const fs::path& path, std::size_t class_count) {
  return parse_predictions(detail::read_text_file(path), class_count);
}

void write_predictions(std::span<const PredictionRecord> records, std::size_t class_count, const fs::path& path) {
  std::string text = "image_id,predicted_class";
  for (std::size_t c = 0; c < class_count; ++c) text += fmt::format(",p_{}", c);
  text += '\n';
  for (const auto& r : records) {
    text += r.image_id;
    text += fmt::format(",{}", r.predicted_class);
    for (double p : r.probabilities) text += "," + format_real(p);
    text += '\n';
  }
  detail::write_text_file(path, text);
}

GroundTruthTable parse_ground_truth(std::string_view csv_text, std::size_t class_count,
                                    std::vector<std::string>* order) {
  const auto lines = detail::split_lines(csv_text);
  if (lines.empty()) throw Error("ground truth: missing header row");
  const auto header = detail::split_fields(lines.front());
  if (header.size() != 2 || header[0] != "image_id" || header[1] != "label") {
    throw Error("ground truth: header must be image_id,label");
  }
  GroundTruthTable table;
  for (std::size_t row = 1; row < lines.size(); ++row) {
    const auto fields = detail::split_fields(lines[row]);
    const std::string where = fmt::format("ground truth row {}", row);
    if (fields.size() != 2) throw Error(fmt::format("{}: expected 2 columns", where));
    std::string id(fields[0]);
    const std::size_t label = detail::parse_index(fields[1], where);
    if (label >= class_count) throw Error(fmt::format("{}: class index {} out of range", where, label));
    if (order) order->push_back(id);
    if (!table.labels.emplace(std::move(id), label).second) {
      throw Error(fmt::format("{}: duplicate image_id", where));
    }
  }
  return table;
}

GroundTruthTable read_ground_truth(const fs::path& path, std::size_t class_count, std::vector<std::string>* order) {
  return parse_ground_truth(detail::read_text_file(path), class_count, order);
}

void write_ground_truth(std::span<const std::string> image_ids, std::span<const std::size_t> labels,
                        const fs::path& path) {
  if (image_ids.size() != labels.size()) throw Error("ground truth: id/label count mismatch");
  std::string text = "image_id,label\n";
  for (std::size_t i = 0; i < image_ids.size(); ++i) text += fmt::format("{},{}\n", image_ids[i], labels[i]);
  detail::write_text_file(path, text);
}

// --------------------------------------------------------------- validation

std::string_view to_string(IssueKind kind) {
  switch (kind) {
    case IssueKind::missing_cam: return "missing_cam";
    case IssueKind::unreadable_cam: return "unreadable_cam";
    case IssueKind::dimension_disagreement: return "dimension_disagreement";
    case IssueKind::missing_predictions: return "missing_predictions";
    case IssueKind::invalid_predictions: return "invalid_predictions";
    case IssueKind::prediction_gap: return "prediction_gap";
    case IssueKind::unexpected_prediction: return "unexpected_prediction";
    case IssueKind::missing_ground_truth: return "missing_ground_truth";
    case IssueKind::invalid_ground_truth: return "invalid_ground_truth";
    case IssueKind::ground_truth_gap: return "ground_truth_gap";
  }
  return "unknown";
}

std::string ValidationIssue::describe() const {
  std::string s(to_string(kind));
  if (!model.empty()) s += " model=" + model;
  if (!image_id.empty()) s += " image=" + image_id;
  if (!detail.empty()) s += ": " + detail;
  return s;
}

namespace {

struct Shape {
  std::size_t height, width;
  bool operator==(const Shape&) const = default;
};

}  // namespace

ValidationReport validate_dataset(const DatasetManifest& manifest) {
  ValidationReport report;
  auto add = [&](IssueKind kind, std::string model, std::string image, std::string detail) {
    report.issues.push_back({kind, std::move(model), std::move(image), std::move(detail)});
  };
  const std::set<std::string> ids(manifest.image_ids.begin(), manifest.image_ids.end());

  // shapes[image][model index]
  std::vector<std::vector<std::optional<Shape>>> shapes(manifest.image_ids.size(),
                                                        std::vector<std::optional<Shape>>(manifest.models.size()));
  for (std::size_t mi = 0; mi < manifest.models.size(); ++mi) {
    const auto& entry = manifest.models[mi];
    const std::string label = entry.model.label();

    const fs::path pred_path = manifest.resolve(entry.predictions_path);
    if (!fs::exists(pred_path)) {
      add(IssueKind::missing_predictions, label, "", pred_path.string());
    } else {
      try {
        const auto records = read_predictions(pred_path, manifest.class_count());
        std::set<std::string> covered;
        for (const auto& r : records) {
          if (!ids.count(r.image_id)) add(IssueKind::unexpected_prediction, label, r.image_id, "not in manifest");
          covered.insert(r.image_id);
        }
        for (const auto& id : manifest.image_ids) {
          if (!covered.count(id)) add(IssueKind::prediction_gap, label, id, "no prediction row");
        }
      } catch (const Error& e) {
        add(IssueKind::invalid_predictions, label, "", e.what());
      }
    }

    for (std::size_t ii = 0; ii < manifest.image_ids.size(); ++ii) {
      const auto& id = manifest.image_ids[ii];
      const fs::path cam_path = manifest.cam_path(entry, id);
      if (!fs::exists(cam_path)) {
        add(IssueKind::missing_cam, label, id, cam_path.string());
        continue;
      }
      try {
        const Cam cam = read_cam(cam_path);
        shapes[ii][mi] = Shape{cam.height(), cam.width()};
      } catch (const Error& e) {
        add(IssueKind::unreadable_cam, label, id, e.what());
      }
    }
  }

  std::size_t baseline_index = 0;
  for (std::size_t mi = 0; mi < manifest.models.size(); ++mi) {
    if (manifest.models[mi].model.is_baseline()) baseline_index = mi;
  }
  for (std::size_t ii = 0; ii < manifest.image_ids.size(); ++ii) {
    std::optional<Shape> reference = shapes[ii][baseline_index];
    for (const auto& s : shapes[ii]) {
      if (!reference && s) reference = s;
    }
    if (!reference) continue;
    for (std::size_t mi = 0; mi < manifest.models.size(); ++mi) {
      const auto& s = shapes[ii][mi];
      if (s && !(*s == *reference)) {
        add(IssueKind::dimension_disagreement, manifest.models[mi].model.label(), manifest.image_ids[ii],
            fmt::format("{}x{} vs {}x{}", s->height, s->width, reference->height, reference->width));
      }
    }
  }

  const fs::path truth_path = manifest.resolve(manifest.ground_truth_path);
  if (!fs::exists(truth_path)) {
    add(IssueKind::missing_ground_truth, "", "", truth_path.string());
  } else {
    try {
      std::vector<std::string> order;
      const auto truth = read_ground_truth(truth_path, manifest.class_count(), &order);
      for (const auto& id : manifest.image_ids) {
        if (!truth.label_of(id)) add(IssueKind::ground_truth_gap, "", id, "no label");
      }
      for (const auto& id : order) {
        if (!ids.count(id)) add(IssueKind::ground_truth_gap, "", id, "label for image not in manifest");
      }
    } catch (const Error& e) {
      add(IssueKind::invalid_ground_truth, "", "", e.what());
    }
  }
  return report;
}

// ------------------------------------------------------------------ loading

const LoadedModel& Dataset::model(const ModelId& id) const {
  for (const auto& m : models) {
    if (m.id == id) return m;
  }
  throw Error(fmt::format("dataset: unknown model {}", id.label()));
}

Dataset load_dataset(const DatasetManifest& manifest, int workers) {
  Dataset ds;
  ds.manifest = manifest;
  ds.truth = read_ground_truth(manifest.resolve(manifest.ground_truth_path), manifest.class_count());
  ds.models.resize(manifest.models.size());

  const auto n_models = static_cast<std::ptrdiff_t>(manifest.models.size());
  std::exception_ptr failure;
  std::mutex failure_mutex;

#pragma omp parallel for schedule(dynamic) num_threads(std::max(workers, 1))
  for (std::ptrdiff_t mi = 0; mi < n_models; ++mi) {
    try {
      const auto& entry = manifest.models[static_cast<std::size_t>(mi)];
      LoadedModel lm;
      lm.id = entry.model;
      lm.cams.reserve(manifest.image_ids.size());
      for (const auto& id : manifest.image_ids) lm.cams.push_back(read_cam(manifest.cam_path(entry, id)));

      auto records = read_predictions(manifest.resolve(entry.predictions_path), manifest.class_count());
      std::map<std::string, PredictionRecord> by_id;
      for (auto& r : records) by_id.emplace(r.image_id, std::move(r));
      lm.predictions.reserve(manifest.image_ids.size());
      for (const auto& id : manifest.image_ids) {
        auto it = by_id.find(id);
        if (it == by_id.end()) {
          throw Error(fmt::format("dataset: {} has no prediction for {}", entry.model.label(), id));
        }
        lm.predictions.push_back(std::move(it->second));
      }
      ds.models[static_cast<std::size_t>(mi)] = std::move(lm);
    } catch (...) {
      std::lock_guard lock(failure_mutex);
      if (!failure) failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);

  const auto& base = ds.baseline();
  for (const auto& m : ds.models) {
    for (std::size_t i = 0; i < m.cams.size(); ++i) {
      if (!m.cams[i].same_shape(base.cams[i])) {
        throw Error(fmt::format("dataset: dimension disagreement for {} image {}", m.id.label(),
                                manifest.image_ids[i]));
      }
    }
  }
  return ds;
}

}  // namespace camdiff
