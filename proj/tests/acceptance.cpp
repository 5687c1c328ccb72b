// Acceptance gate. Prints one PASS/FAIL line per criterion and exits non-zero
// if any criterion fails.

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <functional>
#include <iostream>
#include <random>

#include <fmt/format.h>
#include <json.hpp>
#include <sys/wait.h>

#include "camdiff/analysis.hpp"
#include "camdiff/kernels.hpp"
#include "camdiff/metrics.hpp"
#include "camdiff/report.hpp"
#include "oracle.hpp"
#include "test_util.hpp"

using namespace camdiff;
using camdiff::testing::TempDir;
using Json = nlohmann::json;

namespace {

/// Collects failures for one criterion; the first few are echoed.
struct Check {
  std::size_t failures = 0;
  std::string first;

  void expect(bool ok, const std::string& what) {
    if (ok) return;
    if (failures++ == 0) first = what;
  }
  void near(double got, double want, double tol, const std::string& what) {
    expect(std::fabs(got - want) <= tol, fmt::format("{}: got {:.17g}, want {:.17g}", what, got, want));
  }
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

int failed = 0;

void report(const std::string& name, const Check& c, const std::string& detail) {
  const bool ok = c.failures == 0;
  failed += !ok;
  std::cout << (ok ? "PASS " : "FAIL ") << name << ": " << detail;
  if (!ok) std::cout << fmt::format(" [{} failure(s); first: {}]", c.failures, c.first);
  std::cout << std::endl;
}

void criterion(const std::string& name, const std::function<std::string(Check&)>& body) {
  Check c;
  std::string detail;
  try {
    detail = body(c);
  } catch (const std::exception& e) {
    c.expect(false, std::string("exception: ") + e.what());
  }
  report(name, c, detail);
}

const std::vector<MetricId>& metric_set() { static const auto m = default_metrics(); return m; }

PredictionRecord record(const std::vector<double>& p) {
  return validate_prediction("x", p, std::nullopt, p.size());
}

std::optional<double> oracle_value(const MetricId& id, const std::vector<double>& p, const std::vector<double>& q,
                                   const std::vector<double>& pp, const std::vector<double>& pq) {
  switch (id.kind()) {
    case MetricKind::mad: return oracle::mad(p, q);
    case MetricKind::msd: return oracle::msd(p, q);
    case MetricKind::pearson: return oracle::pearson(p, q);
    case MetricKind::spearman: return oracle::spearman(p, q);
    case MetricKind::overlap_rate: return oracle::overlap(p, q, *id.parameter());
    case MetricKind::class_kld: return oracle::kld(pp, pq, *id.parameter());
  }
  return std::nullopt;
}

SynthSpec planted_spec() {
  SynthSpec s;
  s.images = 200;
  s.size = 32;
  s.clusters = {{"augA", "augB"}, {"augC", "augD"}};
  s.seeds = 3;
  return s;
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(CAMDIFF_CLI) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::vector<AggregatedMetricVector> aggregate_all(const Dataset& ds, const MetricId& metric, int workers) {
  std::vector<AggregatedMetricVector> out;
  for (const auto& aug : ds.manifest.augmentations()) {
    const std::vector<MetricId> one{metric};
    out.push_back(aggregate_over_seeds(compute_metric_matrices(ds, one, ds.manifest.models_of(aug), workers)));
  }
  return out;
}

std::string oracle_equivalence(Check& c) {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(20240601);
  std::size_t undefined_agreements = 0;
  for (int pair = 0; pair < 1000; ++pair) {
    const std::size_t h = 1 + rng() % 16, w = 1 + rng() % 16;
    const auto p = camdiff::testing::grid_values(rng, h * w);
    const auto q = camdiff::testing::grid_values(rng, h * w);
    const Cam cp = validate_cam(h, w, p), cq = validate_cam(h, w, q);
    const std::size_t classes = 2 + rng() % 9;
    const auto pp = camdiff::testing::grid_distribution(rng, classes);
    const auto pq = camdiff::testing::grid_distribution(rng, classes);
    const auto rp = record(pp), rq = record(pq);
    auto metrics = metric_set();
    metrics.push_back(MetricId::make(MetricKind::class_kld, 0.0));
    for (const auto& m : metrics) {
      const auto got = evaluate_metric(m, cp, cq, rp, rq);
      const auto want = oracle_value(m, p, q, pp, pq);
      const std::string where = fmt::format("{} pair {} ({}x{})", m.to_string(), pair, h, w);
      c.expect(got.defined() == want.has_value(), where + ": definedness differs");
      if (got.defined() && want) c.near(*got.value, *want, 1e-12, where);
      undefined_agreements += !got.defined() && !want;
    }
  }
  const double secs = seconds_since(t0);
  c.expect(secs < 5.0, fmt::format("runtime {:.2f}s exceeds 5s", secs));
  return fmt::format("1000 pairs x {} metrics within 1e-12, {} undefined agreements, {:.2f}s", metric_set().size() + 1,
                     undefined_agreements, secs);
}

std::string worked_values(Check& c) {
  const std::vector<double> a{0.2, 0.4}, b{0.5, 0.1};
  c.near(mad(a, b), 0.3, 1e-12, "mad");
  c.near(msd(a, b), 0.09, 1e-12, "msd");
  const std::vector<double> x{0, 0.5, 1}, y{0, 1, 1};
  c.near(*pearson(x, y).value, std::sqrt(3.0) / 2.0, 1e-9, "pearson");
  const std::vector<double> op{0.7, 0.7, 0.7, 0.1}, oq{0.9, 0.1, 0.1, 0.1};
  c.expect(overlap_rate(op, oq, 25) == 1.0 / 3.0, "overlap tie case is not exactly 1/3");
  c.expect(top_region(op, 25).size() == 3, "tie-expanded region size");
  const std::vector<double> kp{0.25, 0.75}, kq{0.5, 0.5};
  c.near(class_kld(kp, kq, 0.0), 0.5 * std::log(2.0) + 0.5 * std::log(2.0 / 3.0), 1e-9, "class_kld");
  c.expect(rank_transform(std::vector<double>{0.2, 0.2, 0.2, 0.9}).ranks == std::vector<double>{2, 2, 2, 4},
           "rank ties");
  return "mad, msd, pearson, overlap tie case, class_kld, average ranks";
}

std::string invariance(Check& c) {
  std::mt19937_64 rng(77);
  std::size_t cases = 0;
  for (int t = 0; t < 1000; ++t) {
    const std::size_t n = 1 + rng() % 256;
    const auto p = camdiff::testing::grid_values(rng, n), q = camdiff::testing::grid_values(rng, n);
    const std::string where = fmt::format("case {}", t);
    c.near(mad(p, q), mad(q, p), 1e-12, where + " mad symmetry");
    c.near(msd(p, q), msd(q, p), 1e-12, where + " msd symmetry");
    for (double yv : {20.0, 10.0, 5.0}) {
      const double o = overlap_rate(p, q, yv);
      c.near(o, overlap_rate(q, p, yv), 1e-12, where + " overlap symmetry");
      c.expect(o >= 0 && o <= 1, where + " overlap bounds");
      const auto region = top_region(p, yv);
      c.expect(region.size() >= static_cast<std::size_t>(std::ceil(n * yv / 100.0)), where + " region size");
    }
    c.expect(mad(p, q) >= 0 && mad(p, q) <= 1 && msd(p, q) >= 0 && msd(p, q) <= 1, where + " mad/msd bounds");
    if (n < 2) continue;
    ++cases;
    const auto r = pearson(p, q), rs = spearman(p, q);
    const auto r2 = pearson(q, p), rs2 = spearman(q, p);
    c.expect(r.defined() == r2.defined() && rs.defined() == rs2.defined(), where + " definedness symmetry");
    if (r.defined()) {
      c.near(*r.value, *r2.value, 1e-12, where + " pearson symmetry");
      c.expect(*r.value >= -1 && *r.value <= 1, where + " pearson bounds");
      // affine transform with positive slope
      std::vector<double> ap(n);
      for (std::size_t j = 0; j < n; ++j) ap[j] = 3.7 * p[j] - 1.25;
      c.near(*pearson(ap, q).value, *r.value, 1e-9, where + " pearson affine");
    }
    if (rs.defined()) {
      c.near(*rs.value, *rs2.value, 1e-12, where + " spearman symmetry");
      c.expect(*rs.value >= -1 && *rs.value <= 1, where + " spearman bounds");
      std::vector<double> mp(n);
      for (std::size_t j = 0; j < n; ++j) mp[j] = std::exp(4.0 * p[j]) + p[j] * p[j] * p[j];
      const auto m = spearman(mp, q);
      c.expect(m.defined() && *m.value == *rs.value, where + " spearman monotone invariance");
    }
  }
  std::size_t kld_cases = 0;
  for (int t = 0; t < 500; ++t) {
    const std::size_t classes = 2 + rng() % 9;
    std::vector<double> p(classes);
    double sum = 0;
    for (auto& v : p) sum += (v = 0.01 + std::uniform_real_distribution<double>(0, 1)(rng));
    for (auto& v : p) v /= sum;
    c.expect(class_kld(p, p, 0.0) == 0.0, fmt::format("kld(P,P,0) case {}", t));
    const auto q = camdiff::testing::grid_distribution(rng, classes);
    c.expect(std::isfinite(class_kld(p, q, 0.0)) && class_kld(p, q, 0.0) >= -1e-12, "kld bounds");
    ++kld_cases;
  }
  return fmt::format("{} correlation cases, {} kld cases", cases, kld_cases);
}

std::string identity_pipeline(Check& c) {
  const auto t0 = Clock::now();
  TempDir dir;
  auto spec = planted_spec();
  spec.perturbation = 0.0;
  const auto manifest = synth_dataset(spec, dir / "data", 1);
  for (const auto& e : manifest.models) {
    if (e.model.is_baseline()) continue;
    c.expect(camdiff::testing::slurp(manifest.resolve(e.predictions_path)) ==
                 camdiff::testing::slurp(manifest.resolve(manifest.baseline().predictions_path)),
             e.model.label() + " predictions are not copies");
    for (const auto& id : manifest.image_ids) {
      c.expect(camdiff::testing::slurp(manifest.cam_path(e, id)) ==
                   camdiff::testing::slurp(manifest.cam_path(manifest.baseline(), id)),
               e.model.label() + " cam " + id + " is not a copy");
    }
  }
  const auto ds = load_dataset(manifest, 1);
  auto metrics = metric_set();
  metrics.push_back(MetricId::make(MetricKind::class_kld, 0.0));
  const auto models = manifest.augmented_models();
  const auto mats = compute_metric_matrices(ds, metrics, models, 1);
  std::size_t checked = 0;
  for (const auto& mm : mats) {
    for (std::size_t i = 0; i < mm.values.size(); ++i) {
      const auto& v = mm.values[i];
      const std::string where = fmt::format("{} {} {}", mm.metric.to_string(), mm.model.label(), mm.image_ids[i]);
      const bool constant = oracle::constant({ds.baseline().cams[i].values().begin(), ds.baseline().cams[i].values().end()});
      switch (mm.metric.kind()) {
        case MetricKind::mad:
        case MetricKind::msd: c.expect(v.value == 0.0, where); break;
        case MetricKind::overlap_rate: c.expect(v.value == 1.0, where); break;
        case MetricKind::pearson:
        case MetricKind::spearman:
          if (constant) {
            c.expect(!v.defined(), where + " constant map should be undefined");
          } else {
            c.expect(v.value == 1.0, where);
          }
          break;
        case MetricKind::class_kld:
          if (mm.metric.parameter() == 0.0) c.expect(v.value == 0.0, where);
          break;
      }
      ++checked;
    }
  }
  RunConfig cfg;
  cfg.manifest_path = dir / "data/manifest.json";
  cfg.out_dir = dir / "out";
  cfg.workers = 1;
  run_pipeline(cfg);
  const double secs = seconds_since(t0);
  c.expect(secs < 10.0, fmt::format("runtime {:.2f}s exceeds 10s", secs));
  return fmt::format("{} metric values exact, full run included, {:.2f}s", checked, secs);
}

std::string planted_clusters(Check& c) {
  const auto t0 = Clock::now();
  TempDir dir;
  const auto manifest = synth_dataset(planted_spec(), dir.path(), 1);
  const auto ds = load_dataset(manifest, 1);
  const auto augs = manifest.augmentations();
  auto cluster = [](const std::string& a) { return a == "augA" || a == "augB" ? 0 : 1; };
  std::vector<CorrelationMap> maps;
  double worst_margin = INFINITY;
  for (auto kind : {MetricKind::mad, MetricKind::msd, MetricKind::pearson}) {
    const auto map = correlation_map(aggregate_all(ds, MetricId::make(kind), 1), CorrelationMethod::pearson);
    double within_min = INFINITY, cross_max = -INFINITY;
    for (std::size_t i = 0; i < augs.size(); ++i) {
      for (std::size_t j = i + 1; j < augs.size(); ++j) {
        const auto v = map.at(i, j);
        c.expect(v.has_value(), "undefined entry " + augs[i] + "|" + augs[j]);
        if (!v) continue;
        if (cluster(map.augmentations[i]) == cluster(map.augmentations[j])) {
          within_min = std::min(within_min, *v);
        } else {
          cross_max = std::max(cross_max, *v);
        }
      }
    }
    c.expect(within_min > cross_max, fmt::format("{}: within min {:.4f} <= cross max {:.4f}",
                                                 MetricId::make(kind).to_string(), within_min, cross_max));
    worst_margin = std::min(worst_margin, within_min - cross_max);
    maps.push_back(map);
  }
  const auto [strongest, weakest] = pair_frequency_tables(maps, 1);
  for (const auto& [pair, count] : strongest.counts) {
    if (count > 0) c.expect(cluster(pair.first) == cluster(pair.second), "cross-cluster pair " + pair.label());
  }
  c.expect(strongest.total() == maps.size(), "k=1 table total");
  const double secs = seconds_since(t0);
  c.expect(secs < 60.0, fmt::format("runtime {:.2f}s exceeds 60s", secs));
  return fmt::format("mad/msd/pearson maps, smallest within-minus-cross margin {:.4f}, {:.2f}s on 1 worker",
                     worst_margin, secs);
}

std::string determinism(Check& c) {
  TempDir dir;
  synth_dataset(planted_spec(), dir / "data", 1);
  const auto manifest = (dir / "data/manifest.json").string();
  std::vector<std::map<std::string, std::string>> bundles;
  for (const auto& [name, workers] : std::vector<std::pair<std::string, int>>{{"a", 1}, {"b", 1}, {"c", 8}}) {
    const int rc = run_cli(fmt::format("run --manifest {} --out {} --workers {}", manifest, (dir / name).string(), workers));
    c.expect(rc == 0, fmt::format("camdiff run exited {}", rc));
    bundles.push_back(camdiff::testing::snapshot(dir / name));
  }
  c.expect(bundles[0] == bundles[1], "repeat run differs");
  c.expect(bundles[0] == bundles[2], "--workers 1 and --workers 8 differ");
  c.expect(bundles[0].size() > 100, "bundle suspiciously small");
  return fmt::format("3 CLI runs, {} files each, byte-identical", bundles[0].size());
}

std::string macro_oracle(Check& c) {
  std::mt19937_64 rng(4242);
  for (int t = 0; t < 200; ++t) {
    const std::size_t classes = t % 2 ? 10 : 2;
    const std::size_t n = 1 + rng() % 300;
    std::vector<std::size_t> truth(n), pred(n);
    ConfusionMatrix cm(classes);
    for (std::size_t i = 0; i < n; ++i) {
      truth[i] = rng() % classes;
      pred[i] = rng() % 3 ? truth[i] : rng() % classes;
      cm.add(truth[i], pred[i]);
    }
    const auto got = macro_scores(cm);
    const auto want = oracle::macro(truth, pred, classes);
    const std::string where = fmt::format("table {}", t);
    c.near(got.accuracy, want.accuracy, 1e-12, where + " accuracy");
    c.near(got.macro_precision, want.precision, 1e-12, where + " precision");
    c.near(got.macro_recall, want.recall, 1e-12, where + " recall");
    c.near(got.macro_f1, want.f1, 1e-12, where + " f1");
  }
  ConfusionMatrix sym(2);
  sym.add(0, 0, 3);
  sym.add(0, 1, 1);
  sym.add(1, 0, 1);
  sym.add(1, 1, 3);
  const auto s = macro_scores(sym);
  for (double v : {s.accuracy, s.macro_precision, s.macro_recall, s.macro_f1}) c.near(v, 0.75, 1e-12, "[[3,1],[1,3]]");
  return "200 tables (C=2 and C=10) within 1e-12, symmetric 2x2 case = 0.75";
}

std::string structural(Check& c) {
  TempDir dir;
  synth_dataset(planted_spec(), dir / "data", 1);
  RunConfig cfg;
  cfg.manifest_path = dir / "data/manifest.json";
  cfg.out_dir = dir / "out";
  const auto summary = run_pipeline(cfg);
  c.expect(summary.correlation_maps == 8, fmt::format("{} correlation maps", summary.correlation_maps));
  const auto index = Json::parse(camdiff::testing::slurp(dir / "out/index.json"));
  const auto& art = index["artifacts"];
  c.expect(art["correlation_maps"].size() == 8, "index lists != 8 correlation maps");
  c.expect(art["frequency_tables"].size() == 2, "frequency table count");
  for (const auto& t : art["frequency_tables"]) {
    c.expect(t["total"] == 32, fmt::format("{} table total {}", t["direction"].get<std::string>(), t["total"].dump()));
    std::size_t sum = 0;
    for (const auto& row : t["counts"]) sum += row["count"].get<std::size_t>();
    c.expect(sum == 32, "frequency counts do not sum to 32");
  }
  const auto counts = camdiff::testing::slurp(dir / "out/segmentation/counts.csv");
  for (Segment s : kAllSegments) c.expect(counts.find(std::string(to_string(s))) != std::string::npos, "segment column");
  std::size_t extremes = 0;
  for (const auto& m : metric_set()) {
    const auto seg = dir / "out/segmentation" / (m.file_stem() + ".csv");
    c.expect(std::filesystem::exists(seg), "missing " + seg.string());
    const auto text = camdiff::testing::slurp(dir / "out/extremes" / (m.file_stem() + ".csv"));
    const bool ok = text.find("\nmean,img") != std::string::npos && text.find("\nstdev,img") != std::string::npos;
    c.expect(ok, "extreme ids missing for " + m.to_string());
    extremes += ok;
  }
  return fmt::format("8 maps, 2 tables of 32, 4-way segmentation, extreme ids for {} metrics", extremes);
}

}  // namespace

int main() {
  criterion("metric oracle equivalence", oracle_equivalence);
  criterion("worked values", worked_values);
  criterion("invariance suite", invariance);
  criterion("identity pipeline", identity_pipeline);
  criterion("planted-cluster recovery", planted_clusters);
  criterion("determinism", determinism);
  criterion("macro-score oracle", macro_oracle);
  criterion("structural reproduction", structural);
  std::cout << (failed ? fmt::format("{} criterion(s) failed\n", failed) : std::string("all criteria passed\n"));
  return failed ? 1 : 0;
}
