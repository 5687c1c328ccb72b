#include "camdiff/report.hpp"

#include <algorithm>
#include <thread>

#include <fmt/format.h>
#include <json.hpp>

#include "camdiff/kernels.hpp"
#include "camdiff/metrics.hpp"
#include "camdiff/svg.hpp"
#include "text_io.hpp"

namespace camdiff {

namespace fs = std::filesystem;
using detail::format_real;
using Json = nlohmann::ordered_json;

std::vector<MetricId> default_metrics() {
  return {MetricId::make(MetricKind::mad),
          MetricId::make(MetricKind::msd),
          MetricId::make(MetricKind::pearson),
          MetricId::make(MetricKind::spearman),
          MetricId::make(MetricKind::overlap_rate, 20.0),
          MetricId::make(MetricKind::overlap_rate, 10.0),
          MetricId::make(MetricKind::overlap_rate, 5.0),
          MetricId::make(MetricKind::class_kld, 1e-10)};
}

namespace {

std::vector<std::string> split_list(std::string_view text) {
  std::vector<std::string> out;
  for (auto field : detail::split_fields(text)) {
    while (!field.empty() && field.front() == ' ') field.remove_prefix(1);
    while (!field.empty() && field.back() == ' ') field.remove_suffix(1);
    if (!field.empty()) out.emplace_back(field);
  }
  return out;
}

}  // namespace

std::vector<MetricId> parse_metric_list(std::string_view comma_separated) {
  std::vector<MetricId> out;
  for (const auto& name : split_list(comma_separated)) {
    auto id = MetricId::parse(name);
    if (std::find(out.begin(), out.end(), id) != out.end()) {
      throw Error(fmt::format("metric '{}' listed twice", name));
    }
    out.push_back(std::move(id));
  }
  if (out.empty()) throw Error("metric list is empty");
  return out;
}

std::set<OutputFormat> parse_formats(std::string_view comma_separated) {
  std::set<OutputFormat> out;
  for (const auto& f : split_list(comma_separated)) {
    if (f == "csv") out.insert(OutputFormat::csv);
    else if (f == "md") out.insert(OutputFormat::md);
    else if (f == "svg") out.insert(OutputFormat::svg);
    else throw Error(fmt::format("unknown output format '{}'", f));
  }
  if (out.empty()) throw Error("format list is empty");
  return out;
}

int default_workers() { return static_cast<int>(std::max(1u, std::thread::hardware_concurrency())); }

void RunConfig::check() const {
  if (metrics.empty()) throw Error("config: metric list is empty");
  if (k == 0) throw Error("config: k must be >= 1");
  if (workers < 1) throw Error("config: workers must be >= 1");
  if (formats.empty()) throw Error("config: no output formats");
}

void set_kld_epsilon(RunConfig& config, double epsilon) {
  for (auto& m : config.metrics) {
    if (m.kind() == MetricKind::class_kld) m = MetricId::make(MetricKind::class_kld, epsilon);
  }
}

namespace {

/// A list key may be a JSON array of strings or one comma-separated string.
std::string list_text(const nlohmann::json& value) {
  if (!value.is_array()) return value.get<std::string>();
  std::string joined;
  for (const auto& v : value) joined += (joined.empty() ? "" : ",") + v.get<std::string>();
  return joined;
}

}  // namespace

RunConfig apply_config_json(std::string_view json_text, RunConfig base) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(fmt::format("config: {}", e.what()));
  }
  if (!doc.is_object()) throw ParseError("config: top level must be an object");
  try {
    for (const auto& [key, value] : doc.items()) {
      if (key == "manifest") base.manifest_path = value.get<std::string>();
      else if (key == "out") base.out_dir = value.get<std::string>();
      else if (key == "metrics") base.metrics = parse_metric_list(list_text(value));
      else if (key == "k") base.k = value.get<std::size_t>();
      else if (key == "corr") base.correlation = parse_correlation_method(value.get<std::string>());
      else if (key == "deletion") {
        const auto d = value.get<std::string>();
        if (d == "pairwise") base.deletion = Deletion::pairwise;
        else if (d == "listwise") base.deletion = Deletion::listwise;
        else throw ParseError(fmt::format("config: unknown deletion '{}'", d));
      } else if (key == "epsilon") set_kld_epsilon(base, value.get<double>());
      else if (key == "workers") base.workers = value.get<int>();
      else if (key == "formats") base.formats = parse_formats(list_text(value));
      else throw ParseError(fmt::format("config: unknown key '{}'", key));
    }
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(fmt::format("config: {}", e.what()));
  } catch (const ParseError&) {
    throw;
  } catch (const Error& e) {
    throw ParseError(fmt::format("config: {}", e.what()));
  }
  return base;
}

DatasetInvalid::DatasetInvalid(ValidationReport report)
    : Error(fmt::format("dataset failed validation with {} issue(s)", report.issues.size())),
      report_(std::move(report)) {}

namespace {

class Bundle {
 public:
  Bundle(fs::path root, const std::set<OutputFormat>& formats) : root_(std::move(root)), formats_(formats) {}

  bool wants(OutputFormat f) const { return formats_.count(f) > 0; }

  /// Writes `text` when `format` is enabled; returns the relative path or "".
  std::string write(OutputFormat format, const std::string& relative, std::string_view text) {
    if (!wants(format)) return {};
    detail::write_text_file(root_ / relative, text);
    return relative;
  }

  void write_always(const std::string& relative, std::string_view text) { detail::write_text_file(root_ / relative, text); }

 private:
  fs::path root_;
  std::set<OutputFormat> formats_;
};

Json files_of(std::initializer_list<std::string> paths) {
  Json arr = Json::array();
  for (const auto& p : paths) {
    if (!p.empty()) arr.push_back(p);
  }
  return arr;
}

std::string value_cell(const MetricValue& v) { return v.defined() ? format_real(*v.value) : "NA"; }

std::string opt_cell(const std::optional<double>& v) { return v ? format_real(*v) : "NA"; }

std::string boxplot_row(const BoxplotStats& b) {
  std::string outliers;
  for (double o : b.outliers) {
    if (!outliers.empty()) outliers += ' ';
    outliers += format_real(o);
  }
  return fmt::format("{},{},{},{},{},{},{},{},{}", b.defined_count, b.undefined_count, format_real(b.median),
                     format_real(b.q1), format_real(b.q3), format_real(b.whisker_low), format_real(b.whisker_high),
                     b.outliers.size(), outliers);
}

constexpr std::string_view kBoxplotColumns =
    "defined_count,undefined_count,median,q1,q3,whisker_low,whisker_high,outlier_count,outliers";

std::string seed_file(const ModelId& m) { return *m.augmentation + "__" + *m.seed; }

std::string metric_title(const MetricId& m) { return m.to_string(); }

std::string correlation_csv(const CorrelationMap& map) {
  std::string s = "augmentation";
  for (const auto& a : map.augmentations) s += "," + a;
  s += '\n';
  for (std::size_t r = 0; r < map.size(); ++r) {
    s += map.augmentations[r];
    for (std::size_t c = 0; c < map.size(); ++c) s += "," + opt_cell(map.at(r, c));
    s += '\n';
  }
  return s;
}

std::string correlation_md(const CorrelationMap& map, CorrelationMethod method) {
  std::string s = fmt::format("# {} correlation across augmentations ({})\n\n", map.metric.to_string(),
                              to_string(method));
  s += "| |";
  for (const auto& a : map.augmentations) s += " " + a + " |";
  s += "\n|---|";
  for (std::size_t c = 0; c < map.size(); ++c) s += "---|";
  s += '\n';
  for (std::size_t r = 0; r < map.size(); ++r) {
    s += "| " + map.augmentations[r] + " |";
    for (std::size_t c = 0; c < map.size(); ++c) {
      const auto v = map.at(r, c);
      s += v ? fmt::format(" {:.4f} |", *v) : std::string(" NA |");
    }
    s += '\n';
  }
  s += fmt::format("\nminimum shared sample count: {}\n", map.sample_count);
  return s;
}

std::string frequency_csv(const PairFrequencyTable& t) {
  std::string s = "first,second,count\n";
  for (const auto& [pair, count] : t.counts) s += fmt::format("{},{},{}\n", pair.first, pair.second, count);
  return s;
}

std::string frequency_md(const PairFrequencyTable& t) {
  std::string s = fmt::format("# Top {} most {} correlated augmentation pairs across {} metrics\n\n", t.k,
                              t.direction == RankDirection::strongest ? "strongly" : "weakly", t.metric_count);
  s += "| pair | count |\n|---|---|\n";
  std::vector<std::pair<AugPair, std::size_t>> rows(t.counts.begin(), t.counts.end());
  std::stable_sort(rows.begin(), rows.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
  for (const auto& [pair, count] : rows) {
    if (count > 0) s += fmt::format("| {} - {} | {} |\n", pair.first, pair.second, count);
  }
  return s;
}

struct ScoreColumn {
  const char* name;
  double MacroScores::*field;
};

constexpr ScoreColumn kScores[] = {{"accuracy", &MacroScores::accuracy},
                                   {"macro_precision", &MacroScores::macro_precision},
                                   {"macro_recall", &MacroScores::macro_recall},
                                   {"macro_f1", &MacroScores::macro_f1}};

}  // namespace

RunSummary run_pipeline(const RunConfig& config) {
  config.check();
  const DatasetManifest manifest = read_manifest(config.manifest_path);
  if (auto report = validate_dataset(manifest); !report.empty()) throw DatasetInvalid(std::move(report));
  const Dataset ds = load_dataset(manifest, config.workers);

  const auto augs = manifest.augmentations();
  const auto models = manifest.augmented_models();
  const auto& metrics = config.metrics;
  const auto matrices = compute_metric_matrices(ds, metrics, models, config.workers);
  auto matrix_at = [&](std::size_t metric_index, std::size_t model_index) -> const MetricMatrix& {
    return matrices[metric_index * models.size() + model_index];
  };

  Bundle bundle(config.out_dir, config.formats);
  RunSummary summary;
  summary.metric_matrices = matrices.size();

  Json index;
  index["dataset_name"] = manifest.dataset_name;
  index["images"] = manifest.image_ids.size();
  index["augmentations"] = augs;
  index["seeds"] = manifest.seeds();
  {
    Json ms = Json::array();
    for (const auto& m : metrics) ms.push_back(m.to_string());
    index["metrics"] = std::move(ms);
  }
  index["k"] = config.k;
  index["correlation_method"] = std::string(to_string(config.correlation));
  index["deletion"] = config.deletion == Deletion::pairwise ? "pairwise" : "listwise";
  Json artifacts;
  Json notes = Json::array();
  auto note = [&](std::string text) {
    summary.notes.push_back(text);
    notes.push_back(std::move(text));
  };

  // Metric matrices.
  Json matrix_entries = Json::array();
  for (std::size_t k = 0; k < metrics.size(); ++k) {
    for (std::size_t mi = 0; mi < models.size(); ++mi) {
      const auto& mat = matrix_at(k, mi);
      std::string csv = "image_id,value,reason\n";
      for (std::size_t i = 0; i < mat.image_ids.size(); ++i) {
        csv += fmt::format("{},{},{}\n", mat.image_ids[i], value_cell(mat.values[i]), to_string(mat.values[i].reason));
      }
      const auto path = bundle.write(OutputFormat::csv,
                                     fmt::format("matrices/{}/{}.csv", metrics[k].file_stem(), seed_file(models[mi])), csv);
      matrix_entries.push_back({{"metric", metrics[k].to_string()},
                                {"augmentation", *models[mi].augmentation},
                                {"seed", *models[mi].seed},
                                {"files", files_of({path})}});
    }
  }
  artifacts["metric_matrices"] = std::move(matrix_entries);

  // Seed aggregation: aggregated[metric][aug].
  std::vector<std::vector<AggregatedMetricVector>> aggregated(metrics.size());
  Json aggregated_entries = Json::array();
  for (std::size_t k = 0; k < metrics.size(); ++k) {
    for (const auto& aug : augs) {
      std::vector<MetricMatrix> seeds;
      for (std::size_t mi = 0; mi < models.size(); ++mi) {
        if (*models[mi].augmentation == aug) seeds.push_back(matrix_at(k, mi));
      }
      auto vec = aggregate_over_seeds(seeds);
      std::string csv = "image_id,value,contributing_seeds,seed_count\n";
      for (std::size_t i = 0; i < vec.image_ids.size(); ++i) {
        csv += fmt::format("{},{},{},{}\n", vec.image_ids[i], value_cell(vec.values[i]), vec.contributing_seeds[i],
                           vec.seed_count);
      }
      const auto path =
          bundle.write(OutputFormat::csv, fmt::format("aggregated/{}/{}.csv", metrics[k].file_stem(), aug), csv);
      aggregated_entries.push_back(
          {{"metric", metrics[k].to_string()}, {"augmentation", aug}, {"files", files_of({path})}});
      aggregated[k].push_back(std::move(vec));
    }
  }
  artifacts["aggregated"] = std::move(aggregated_entries);

  // Distribution statistics.
  Json boxplot_entries = Json::array();
  for (std::size_t k = 0; k < metrics.size(); ++k) {
    if (augs.empty()) break;
    std::vector<std::pair<std::string, BoxplotStats>> boxes;
    std::string csv = fmt::format("augmentation,{}\n", kBoxplotColumns);
    for (const auto& vec : aggregated[k]) {
      try {
        auto stats = boxplot_stats(vec);
        csv += vec.augmentation + "," + boxplot_row(stats) + "\n";
        boxes.emplace_back(vec.augmentation, std::move(stats));
      } catch (const Error& e) {
        note(fmt::format("boxplot {} {}: {}", metrics[k].to_string(), vec.augmentation, e.what()));
      }
    }
    const std::string stem = metrics[k].file_stem();
    const auto csv_path = bundle.write(OutputFormat::csv, "boxplots/" + stem + ".csv", csv);
    std::string svg_path;
    if (!boxes.empty()) {
      svg_path = bundle.write(OutputFormat::svg, "boxplots/" + stem + ".svg",
                              render_boxplot(boxes, fmt::format("{} distribution over the test set", metric_title(metrics[k])),
                                             metric_title(metrics[k])));
    }
    boxplot_entries.push_back({{"metric", metrics[k].to_string()}, {"files", files_of({csv_path, svg_path})}});
  }
  artifacts["boxplots"] = std::move(boxplot_entries);

  // Cross-augmentation correlation maps.
  std::vector<CorrelationMap> maps;
  Json map_entries = Json::array();
  if (augs.size() >= 2) {
    for (std::size_t k = 0; k < metrics.size(); ++k) {
      try {
        auto map = correlation_map(aggregated[k], config.correlation, config.deletion);
        const std::string stem = metrics[k].file_stem();
        const auto csv_path = bundle.write(OutputFormat::csv, "correlation/" + stem + ".csv", correlation_csv(map));
        const auto md_path =
            bundle.write(OutputFormat::md, "correlation/" + stem + ".md", correlation_md(map, config.correlation));
        const auto svg_path = bundle.write(
            OutputFormat::svg, "correlation/" + stem + ".svg",
            render_heatmap(map, fmt::format("{} correlation between augmentations", metric_title(metrics[k]))));
        map_entries.push_back({{"metric", metrics[k].to_string()},
                               {"sample_count", map.sample_count},
                               {"files", files_of({csv_path, md_path, svg_path})}});
        maps.push_back(std::move(map));
      } catch (const Error& e) {
        note(fmt::format("correlation map {}: {}", metrics[k].to_string(), e.what()));
      }
    }
  } else {
    note("correlation maps need at least 2 augmentations");
  }
  summary.correlation_maps = maps.size();
  artifacts["correlation_maps"] = std::move(map_entries);

  // Pair frequency tables.
  Json table_entries = Json::array();
  const std::size_t pair_count = augs.size() * (augs.size() - std::min<std::size_t>(augs.size(), 1)) / 2;
  summary.effective_k = std::min(config.k, pair_count);
  index["effective_k"] = summary.effective_k;
  if (!maps.empty() && summary.effective_k > 0) {
    if (summary.effective_k < config.k) {
      note(fmt::format("k clamped from {} to the {} available augmentation pairs", config.k, pair_count));
    }
    const auto [strongest, weakest] = pair_frequency_tables(maps, summary.effective_k);
    for (const auto* t : {&strongest, &weakest}) {
      const std::string name = t->direction == RankDirection::strongest ? "strongest" : "weakest";
      const auto csv_path = bundle.write(OutputFormat::csv, "frequency/" + name + ".csv", frequency_csv(*t));
      const auto md_path = bundle.write(OutputFormat::md, "frequency/" + name + ".md", frequency_md(*t));
      Json counts = Json::array();
      for (const auto& [pair, count] : t->counts) counts.push_back({{"first", pair.first}, {"second", pair.second}, {"count", count}});
      table_entries.push_back({{"direction", name},
                               {"k", t->k},
                               {"metric_count", t->metric_count},
                               {"total", t->total()},
                               {"counts", std::move(counts)},
                               {"files", files_of({csv_path, md_path})}});
    }
  }
  summary.frequency_tables = table_entries.size();
  artifacts["frequency_tables"] = std::move(table_entries);

  // Correctness segmentation, per (augmentation, seed).
  Json segmentation_entries = Json::array();
  if (!models.empty()) {
    std::vector<Segmentation> segmentations;
    std::string counts_csv = "augmentation,seed";
    for (auto s : kAllSegments) counts_csv += fmt::format(",{}", to_string(s));
    counts_csv += ",one_correct\n";
    for (const auto& m : models) {
      auto seg = segment_by_correctness(ds, *m.augmentation, *m.seed);
      counts_csv += *m.augmentation + "," + *m.seed;
      for (auto s : kAllSegments) counts_csv += fmt::format(",{}", seg.count(s));
      counts_csv += fmt::format(",{}\n", seg.count(Segment::baseline_only_correct) + seg.count(Segment::augmented_only_correct));
      segmentations.push_back(std::move(seg));
    }
    const auto counts_path = bundle.write(OutputFormat::csv, "segmentation/counts.csv", counts_csv);
    segmentation_entries.push_back({{"kind", "counts"}, {"files", files_of({counts_path})}});
    for (std::size_t k = 0; k < metrics.size(); ++k) {
      std::string csv = fmt::format("augmentation,seed,segment,{}\n", kBoxplotColumns);
      for (std::size_t mi = 0; mi < models.size(); ++mi) {
        const auto& mat = matrix_at(k, mi);
        for (const auto& [segment, stats] : segmented_boxplots(mat.image_ids, mat.values, segmentations[mi])) {
          csv += fmt::format("{},{},{},{}\n", *models[mi].augmentation, *models[mi].seed, to_string(segment),
                             boxplot_row(stats));
        }
      }
      const auto path = bundle.write(OutputFormat::csv, "segmentation/" + metrics[k].file_stem() + ".csv", csv);
      segmentation_entries.push_back(
          {{"kind", "boxplots"}, {"metric", metrics[k].to_string()}, {"files", files_of({path})}});
    }
  }
  artifacts["segmentation"] = std::move(segmentation_entries);

  // Extreme images.
  Json extreme_entries = Json::array();
  for (std::size_t k = 0; k < metrics.size() && !augs.empty(); ++k) {
    Json found = Json::object();
    std::string csv = "statistic,image_id,value\n";
    for (auto stat : {ExtremeStatistic::mean, ExtremeStatistic::stdev}) {
      if (stat == ExtremeStatistic::stdev && augs.size() < 2) continue;
      try {
        const auto e = find_extreme_images(aggregated[k], stat);
        csv += fmt::format("{},{},{}\n", to_string(stat), e.image_id, format_real(e.value));
        found[std::string(to_string(stat))] = {{"image_id", e.image_id}, {"value", e.value}};
      } catch (const Error& err) {
        note(fmt::format("extremes {} {}: {}", metrics[k].to_string(), to_string(stat), err.what()));
      }
    }
    const auto path = bundle.write(OutputFormat::csv, "extremes/" + metrics[k].file_stem() + ".csv", csv);
    extreme_entries.push_back({{"metric", metrics[k].to_string()}, {"images", std::move(found)}, {"files", files_of({path})}});
  }
  artifacts["extremes"] = std::move(extreme_entries);

  // Classification performance.
  {
    std::string models_csv = "model,augmentation,seed,accuracy,macro_precision,macro_recall,macro_f1,zero_division_classes\n";
    auto scores_of = [&](const LoadedModel& lm) {
      return macro_scores(confusion_matrix(lm.predictions, ds.truth, manifest.class_count()));
    };
    auto score_row = [](const MacroScores& s) {
      std::string zero;
      for (auto c : s.zero_division_classes) zero += (zero.empty() ? "" : " ") + std::to_string(c);
      return fmt::format("{},{},{},{},{}", format_real(s.accuracy), format_real(s.macro_precision),
                         format_real(s.macro_recall), format_real(s.macro_f1), zero);
    };
    const MacroScores base_scores = scores_of(ds.baseline());
    models_csv += "baseline,,," + score_row(base_scores) + "\n";
    std::vector<std::pair<std::string, MacroScores>> per_aug{{"baseline", base_scores}};
    for (const auto& aug : augs) {
      MacroScores mean;
      const auto seeds = manifest.models_of(aug);
      for (const auto& m : seeds) {
        const auto s = scores_of(ds.model(m));
        models_csv += fmt::format("{},{},{},{}\n", m.label(), *m.augmentation, *m.seed, score_row(s));
        for (const auto& col : kScores) mean.*col.field += s.*col.field;
      }
      for (const auto& col : kScores) mean.*col.field /= static_cast<double>(seeds.size());
      per_aug.emplace_back(aug, mean);
    }
    std::string aug_csv = "augmentation,seed_count,accuracy,macro_precision,macro_recall,macro_f1\n";
    std::string md = "# Classification performance (mean over seeds)\n\n| model | accuracy | precision | recall | f1 |\n|---|---|---|---|---|\n";
    for (const auto& [name, s] : per_aug) {
      const std::size_t n = name == "baseline" ? 1 : manifest.models_of(name).size();
      aug_csv += fmt::format("{},{},{},{},{},{}\n", name, n, format_real(s.accuracy), format_real(s.macro_precision),
                             format_real(s.macro_recall), format_real(s.macro_f1));
      md += fmt::format("| {} | {:.4f} | {:.4f} | {:.4f} | {:.4f} |\n", name, s.accuracy, s.macro_precision,
                        s.macro_recall, s.macro_f1);
    }
    Json perf = Json::array();
    perf.push_back({{"kind", "models"}, {"files", files_of({bundle.write(OutputFormat::csv, "performance/models.csv", models_csv)})}});
    perf.push_back({{"kind", "augmentations"},
                    {"files", files_of({bundle.write(OutputFormat::csv, "performance/augmentations.csv", aug_csv),
                                        bundle.write(OutputFormat::md, "performance/performance.md", md)})}});
    for (const auto& col : kScores) {
      std::vector<std::pair<std::string, double>> bars;
      for (const auto& [name, s] : per_aug) bars.emplace_back(name, s.*col.field);
      const auto path = bundle.write(OutputFormat::svg, fmt::format("performance/{}.svg", col.name),
                                     render_bars(bars, col.name));
      perf.push_back({{"kind", "bars"}, {"score", col.name}, {"files", files_of({path})}});
    }
    artifacts["performance"] = std::move(perf);
  }

  index["artifacts"] = std::move(artifacts);
  index["notes"] = std::move(notes);
  bundle.write_always("index.json", index.dump(2) + "\n");
  return summary;
}

ExtremesResult run_extremes(const RunConfig& config, const MetricId& metric, ExtremeStatistic statistic) {
  config.check();
  const DatasetManifest manifest = read_manifest(config.manifest_path);
  if (auto report = validate_dataset(manifest); !report.empty()) throw DatasetInvalid(std::move(report));
  const Dataset ds = load_dataset(manifest, config.workers);
  const auto augs = manifest.augmentations();
  if (augs.empty()) throw Error("extremes: dataset has no augmented models");

  const std::vector<MetricId> metrics{metric};
  std::vector<AggregatedMetricVector> aggregated;
  std::vector<std::vector<MetricMatrix>> per_aug;
  for (const auto& aug : augs) {
    const auto models = manifest.models_of(aug);
    auto mats = compute_metric_matrices(ds, metrics, models, config.workers);
    aggregated.push_back(aggregate_over_seeds(mats));
    per_aug.push_back(std::move(mats));
  }
  const ExtremeImage winner = find_extreme_images(aggregated, statistic);
  const auto it = std::find(manifest.image_ids.begin(), manifest.image_ids.end(), winner.image_id);
  const auto image_index = static_cast<std::size_t>(it - manifest.image_ids.begin());

  std::vector<std::pair<std::string, const Cam*>> cells{{"baseline", &ds.baseline().cams[image_index]}};
  Json values = Json::array();
  for (std::size_t a = 0; a < augs.size(); ++a) {
    for (const auto& mat : per_aug[a]) {
      const auto& v = mat.values[image_index];
      cells.emplace_back(v.defined() ? fmt::format("{} ({:.3f})", mat.model.label(), *v.value)
                                     : fmt::format("{} (NA)", mat.model.label()),
                         &ds.model(mat.model).cams[image_index]);
      values.push_back({{"model", mat.model.label()},
                        {"augmentation", *mat.model.augmentation},
                        {"seed", *mat.model.seed},
                        {"value", v.defined() ? Json(*v.value) : Json(nullptr)}});
    }
  }
  Json aggregated_values = Json::object();
  for (const auto& vec : aggregated) {
    const auto& v = vec.values[image_index];
    aggregated_values[vec.augmentation] = v.defined() ? Json(*v.value) : Json(nullptr);
  }

  const std::string stem = fmt::format("extremes_{}_{}", metric.file_stem(), to_string(statistic));
  ExtremesResult result{winner, config.out_dir / (stem + ".svg"), config.out_dir / (stem + ".json")};
  detail::write_text_file(result.grid_svg,
                          render_cam_grid(cells, fmt::format("{}: image {} ({} {:.4f})", metric.to_string(),
                                                             winner.image_id, to_string(statistic), winner.value)));
  Json index;
  index["metric"] = metric.to_string();
  index["statistic"] = std::string(to_string(statistic));
  index["image_id"] = winner.image_id;
  index["score"] = winner.value;
  index["grid"] = stem + ".svg";
  index["aggregated"] = std::move(aggregated_values);
  index["models"] = std::move(values);
  detail::write_text_file(result.index_json, index.dump(2) + "\n");
  return result;
}

}  // namespace camdiff
