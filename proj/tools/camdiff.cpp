// camdiff command line: validate | run | synth | extremes
//
// Exit codes: 0 success, 1 content or validation failure, 2 usage or parse
// failure.

#include <cstdio>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "camdiff/interchange.hpp"
#include "camdiff/report.hpp"

namespace {

constexpr int kOk = 0;
constexpr int kContentFailure = 1;
constexpr int kUsageFailure = 2;

struct RunFlags {
  std::string manifest;
  std::string out;
  std::string metrics;
  std::string corr;
  std::string formats;
  std::string deletion;
  std::string config;
  std::size_t k = 0;
  double epsilon = 0.0;
  int workers = 0;

  CLI::Option* k_opt = nullptr;
  CLI::Option* epsilon_opt = nullptr;
  CLI::Option* workers_opt = nullptr;
};

void add_run_flags(CLI::App* cmd, RunFlags& f, bool with_analysis_flags) {
  cmd->add_option("--manifest", f.manifest, "dataset manifest.json");
  cmd->add_option("--out", f.out, "output directory");
  cmd->add_option("--config", f.config, "JSON config file (flags override it)");
  f.workers_opt = cmd->add_option("--workers", f.workers, "worker threads (default: logical processors)");
  f.epsilon_opt = cmd->add_option("--epsilon", f.epsilon, "class_kld epsilon");
  if (with_analysis_flags) {
    cmd->add_option("--metrics", f.metrics, "comma-separated metrics, e.g. mad,overlap_rate@20,class_kld@1e-10");
    f.k_opt = cmd->add_option("--k", f.k, "pairs per ranking (default 4)");
    cmd->add_option("--corr", f.corr, "correlation method for maps")->check(CLI::IsMember({"pearson", "spearman"}));
    cmd->add_option("--deletion", f.deletion, "undefined handling in maps")
        ->check(CLI::IsMember({"pairwise", "listwise"}));
    cmd->add_option("--formats", f.formats, "comma-separated subset of csv,md,svg");
  }
}

camdiff::RunConfig build_config(const RunFlags& f) {
  camdiff::RunConfig cfg;
  if (!f.config.empty()) {
    std::FILE* fp = std::fopen(f.config.c_str(), "rb");
    if (!fp) throw camdiff::ParseError(fmt::format("cannot open config '{}'", f.config));
    std::string text;
    char buf[4096];
    for (std::size_t n; (n = std::fread(buf, 1, sizeof buf, fp)) > 0;) text.append(buf, n);
    std::fclose(fp);
    cfg = camdiff::apply_config_json(text, cfg);
  }
  if (!f.manifest.empty()) cfg.manifest_path = f.manifest;
  if (!f.out.empty()) cfg.out_dir = f.out;
  if (!f.metrics.empty()) cfg.metrics = camdiff::parse_metric_list(f.metrics);
  if (!f.corr.empty()) cfg.correlation = camdiff::parse_correlation_method(f.corr);
  if (!f.deletion.empty()) cfg.deletion = f.deletion == "listwise" ? camdiff::Deletion::listwise : camdiff::Deletion::pairwise;
  if (!f.formats.empty()) cfg.formats = camdiff::parse_formats(f.formats);
  if (f.k_opt && f.k_opt->count()) cfg.k = f.k;
  if (f.workers_opt->count()) cfg.workers = f.workers;
  if (f.epsilon_opt->count()) camdiff::set_kld_epsilon(cfg, f.epsilon);
  if (cfg.manifest_path.empty()) throw camdiff::ParseError("--manifest is required");
  if (cfg.out_dir.empty()) throw camdiff::ParseError("--out is required");
  cfg.check();
  return cfg;
}

void print_report(const camdiff::ValidationReport& report) {
  for (const auto& issue : report.issues) std::cout << issue.describe() << '\n';
}

int cmd_validate(const std::string& manifest_path) {
  const auto manifest = camdiff::read_manifest(manifest_path);
  const auto report = camdiff::validate_dataset(manifest);
  if (report.empty()) {
    std::cout << fmt::format("ok: {} models x {} images\n", manifest.models.size(), manifest.image_ids.size());
    return kOk;
  }
  print_report(report);
  std::cout << fmt::format("{} issue(s)\n", report.issues.size());
  return kContentFailure;
}

int cmd_run(const RunFlags& flags) {
  camdiff::RunConfig cfg;
  try {
    cfg = build_config(flags);
  } catch (const camdiff::Error& e) {
    std::cerr << "camdiff run: " << e.what() << '\n';
    return kUsageFailure;
  }
  const auto summary = camdiff::run_pipeline(cfg);
  for (const auto& n : summary.notes) std::cerr << "note: " << n << '\n';
  std::cout << fmt::format("run: {} metric matrices, {} correlation maps, {} frequency tables -> {}\n",
                           summary.metric_matrices, summary.correlation_maps, summary.frequency_tables,
                           cfg.out_dir.string());
  return kOk;
}

int cmd_extremes(const RunFlags& flags, const std::string& metric, const std::string& statistic) {
  camdiff::RunConfig cfg;
  std::optional<camdiff::MetricId> id;
  camdiff::ExtremeStatistic stat{};
  try {
    cfg = build_config(flags);
    id = camdiff::MetricId::parse(metric);
    if (id->kind() == camdiff::MetricKind::class_kld && flags.epsilon_opt->count()) {
      id = camdiff::MetricId::make(camdiff::MetricKind::class_kld, flags.epsilon);
    }
    stat = camdiff::parse_extreme_statistic(statistic);
  } catch (const camdiff::Error& e) {
    std::cerr << "camdiff extremes: " << e.what() << '\n';
    return kUsageFailure;
  }
  const auto result = camdiff::run_extremes(cfg, *id, stat);
  std::cout << fmt::format("extremes: {} {} -> image {} ({})\n", id->to_string(), statistic, result.image.image_id,
                           result.grid_svg.string());
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"camdiff: compare class activation maps of augmented models against a baseline"};
  app.require_subcommand(1);

  std::string validate_manifest;
  auto* validate = app.add_subcommand("validate", "check a dataset layout");
  validate->add_option("--manifest", validate_manifest, "dataset manifest.json")->required();

  RunFlags run_flags;
  auto* run = app.add_subcommand("run", "compute all metrics and write the report bundle");
  add_run_flags(run, run_flags, true);

  std::string synth_spec, synth_out;
  int synth_workers = 1;
  auto* synth = app.add_subcommand("synth", "write a synthetic dataset");
  synth->add_option("--seed-spec", synth_spec, "synthetic dataset spec (JSON)")->required();
  synth->add_option("--out", synth_out, "output directory")->required();
  synth->add_option("--workers", synth_workers, "worker threads");

  RunFlags ext_flags;
  std::string ext_metric = "mad", ext_statistic = "mean";
  auto* extremes = app.add_subcommand("extremes", "render the CAM grid of the most extreme image");
  add_run_flags(extremes, ext_flags, false);
  extremes->add_option("--metric", ext_metric, "metric to rank images by");
  extremes->add_option("--statistic", ext_statistic, "mean or stdev across augmentations")
      ->check(CLI::IsMember({"mean", "stdev"}));

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsageFailure;
  }

  try {
    if (*validate) return cmd_validate(validate_manifest);
    if (*run) return cmd_run(run_flags);
    if (*synth) {
      const auto spec = camdiff::read_synth_spec(synth_spec);
      const auto manifest = camdiff::synth_dataset(spec, synth_out, std::max(synth_workers, 1));
      std::cout << fmt::format("synth: {} models x {} images -> {}\n", manifest.models.size(),
                               manifest.image_ids.size(), synth_out);
      return kOk;
    }
    if (*extremes) return cmd_extremes(ext_flags, ext_metric, ext_statistic);
  } catch (const camdiff::ParseError& e) {
    std::cerr << "camdiff: " << e.what() << '\n';
    return kUsageFailure;
  } catch (const camdiff::DatasetInvalid& e) {
    std::cerr << "camdiff: " << e.what() << '\n';
    print_report(e.report());
    return kContentFailure;
  } catch (const std::exception& e) {
    std::cerr << "camdiff: " << e.what() << '\n';
    return kContentFailure;
  }
  return kUsageFailure;
}
