#include <algorithm>
#include <cmath>
#include <exception>
#include <mutex>
#include <numbers>
#include <random>
#include <set>

#include <fmt/format.h>
#include <json.hpp>

#include "camdiff/interchange.hpp"
#include "text_io.hpp"

namespace camdiff {

namespace fs = std::filesystem;

namespace {

std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Independent stream per (master seed, tag). mt19937_64 and the conversions
// below are fully specified, so output is identical on every platform.
class Stream {
 public:
  Stream(std::uint64_t master, std::string_view tag) : engine_(splitmix64(master ^ fnv1a(tag))) {}

  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double normal() {
    const double u1 = 1.0 - uniform();  // (0, 1]
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

  std::size_t below(std::size_t n) {
    return std::min(static_cast<std::size_t>(uniform() * static_cast<double>(n)), n - 1);
  }

 private:
  std::mt19937_64 engine_;
};

// Bilinear upsampling of a coarse K x K grid of uniforms, K = max(2, size / 8).
std::vector<double> smooth_field(Stream& rng, std::size_t size) {
  const std::size_t k = std::max<std::size_t>(2, size / 8);
  std::vector<double> grid(k * k);
  for (auto& g : grid) g = rng.uniform();

  auto coord = [&](std::size_t i) {
    const double t = size == 1 ? 0.0
                               : static_cast<double>(i) * static_cast<double>(k - 1) / static_cast<double>(size - 1);
    const auto i0 = std::min(static_cast<std::size_t>(t), k - 2);
    return std::pair{i0, t - static_cast<double>(i0)};
  };

  std::vector<double> field(size * size);
  for (std::size_t r = 0; r < size; ++r) {
    const auto [y0, fy] = coord(r);
    for (std::size_t c = 0; c < size; ++c) {
      const auto [x0, fx] = coord(c);
      const double top = grid[y0 * k + x0] * (1.0 - fx) + grid[y0 * k + x0 + 1] * fx;
      const double bottom = grid[(y0 + 1) * k + x0] * (1.0 - fx) + grid[(y0 + 1) * k + x0 + 1] * fx;
      field[r * size + c] = top * (1.0 - fy) + bottom * fy;
    }
  }
  return field;
}

void min_max_normalize(std::vector<double>& v) {
  const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
  const double min = *lo, range = *hi - *lo;
  for (auto& x : v) x = range > 0.0 ? (x - min) / range : 0.0;
}

std::vector<double> softmax(const std::vector<double>& z) {
  const double peak = *std::max_element(z.begin(), z.end());
  std::vector<double> p(z.size());
  double sum = 0.0;
  for (std::size_t c = 0; c < z.size(); ++c) sum += (p[c] = std::exp(z[c] - peak));
  for (auto& x : p) x /= sum;
  return p;
}

void move_max_to(std::vector<double>& z, std::size_t target) {
  const auto best = static_cast<std::size_t>(std::max_element(z.begin(), z.end()) - z.begin());
  std::swap(z[best], z[target]);
}

void check_spec(const SynthSpec& s) {
  if (s.images < 2) throw Error("synth: need at least 2 images");
  if (s.size < 1) throw Error("synth: map size must be >= 1");
  if (s.classes < 1) throw Error("synth: need at least 1 class");
  if (s.seeds < 1) throw Error("synth: seeds must be >= 1");
  std::set<std::string> names;
  for (const auto& cluster : s.clusters) {
    if (cluster.empty()) throw Error("synth: empty cluster");
    for (const auto& a : cluster) {
      if (a.empty() || a.find_first_of("/\\ ,") != std::string::npos) {
        throw Error(fmt::format("synth: invalid augmentation name '{}'", a));
      }
      if (!names.insert(a).second) throw Error(fmt::format("synth: augmentation '{}' listed twice", a));
    }
  }
  auto unit = [](double v) { return v >= 0.0 && v <= 1.0; };
  if (!unit(s.perturbation)) throw Error("synth: perturbation must lie in [0, 1]");
  if (!(s.noise >= 0.0)) throw Error("synth: noise must be >= 0");
  if (!unit(s.agreement) || !unit(s.baseline_accuracy)) throw Error("synth: rates must lie in [0, 1]");
}

}  // namespace

SynthSpec parse_synth_spec(std::string_view json_text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(fmt::format("synth spec: {}", e.what()));
  }
  if (!doc.is_object()) throw ParseError("synth spec: top level must be an object");
  SynthSpec s;
  try {
    for (const auto& [key, value] : doc.items()) {
      if (key == "dataset_name") s.dataset_name = value.get<std::string>();
      else if (key == "images") s.images = value.get<std::size_t>();
      else if (key == "size") s.size = value.get<std::size_t>();
      else if (key == "classes") s.classes = value.get<std::size_t>();
      else if (key == "clusters") s.clusters = value.get<std::vector<std::vector<std::string>>>();
      else if (key == "seeds") s.seeds = value.get<std::size_t>();
      else if (key == "master_seed") s.master_seed = value.get<std::uint64_t>();
      else if (key == "perturbation") s.perturbation = value.get<double>();
      else if (key == "noise") s.noise = value.get<double>();
      else if (key == "agreement") s.agreement = value.get<double>();
      else if (key == "baseline_accuracy") s.baseline_accuracy = value.get<double>();
      else throw ParseError(fmt::format("synth spec: unknown key '{}'", key));
    }
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(fmt::format("synth spec: {}", e.what()));
  }
  return s;
}

SynthSpec read_synth_spec(const fs::path& path) {
  try {
    return parse_synth_spec(detail::read_text_file(path));
  } catch (const ParseError&) {
    throw;
  } catch (const Error& e) {
    throw ParseError(e.what());
  }
}

DatasetManifest synth_dataset(const SynthSpec& spec, const fs::path& out_dir, int workers) {
  check_spec(spec);
  const std::size_t n_images = spec.images;
  const std::size_t n_pixels = spec.size * spec.size;
  const double w = spec.perturbation;

  DatasetManifest m;
  m.dataset_name = spec.dataset_name;
  m.base_dir = out_dir;
  m.ground_truth_path = "ground_truth.csv";
  for (std::size_t c = 0; c < spec.classes; ++c) m.class_names.push_back(fmt::format("class{}", c));
  const int id_width = static_cast<int>(std::to_string(n_images - 1).size());
  for (std::size_t i = 0; i < n_images; ++i) m.image_ids.push_back(fmt::format("img{:0{}}", i, id_width));

  m.models.push_back({ModelId::baseline(), "baseline/cams", "baseline/predictions.csv"});
  std::vector<std::size_t> cluster_of;  // per augmented model entry
  for (std::size_t ci = 0; ci < spec.clusters.size(); ++ci) {
    for (const auto& aug : spec.clusters[ci]) {
      for (std::size_t s = 1; s <= spec.seeds; ++s) {
        const std::string seed = fmt::format("s{}", s);
        const std::string dir = aug + "__" + seed;
        m.models.push_back({ModelId::augmented(aug, seed), dir + "/cams", dir + "/predictions.csv"});
        cluster_of.push_back(ci);
      }
    }
  }

  // Shared per-image inputs.
  std::vector<std::vector<double>> base(n_images);
  std::vector<std::vector<std::vector<double>>> cluster_fields(spec.clusters.size(),
                                                               std::vector<std::vector<double>>(n_images));
  std::vector<std::size_t> truth(n_images);
  std::vector<std::vector<double>> base_logits(n_images);
  for (std::size_t i = 0; i < n_images; ++i) {
    const auto& id = m.image_ids[i];
    Stream field_rng(spec.master_seed, "base/" + id);
    base[i] = smooth_field(field_rng, spec.size);
    min_max_normalize(base[i]);
    for (std::size_t ci = 0; ci < spec.clusters.size(); ++ci) {
      Stream crng(spec.master_seed, fmt::format("cluster/{}/{}", ci, id));
      cluster_fields[ci][i] = smooth_field(crng, spec.size);
      min_max_normalize(cluster_fields[ci][i]);
    }
    Stream trng(spec.master_seed, "truth/" + id);
    truth[i] = trng.below(spec.classes);
    Stream prng(spec.master_seed, "pred/baseline/" + id);
    std::vector<double> z(spec.classes);
    for (auto& x : z) x = 2.0 * prng.normal();
    const bool correct = prng.uniform() < spec.baseline_accuracy;
    move_max_to(z, correct ? truth[i] : prng.below(spec.classes));
    base_logits[i] = std::move(z);
  }

  std::vector<std::size_t> base_predicted(n_images);
  for (std::size_t i = 0; i < n_images; ++i) {
    base_predicted[i] = argmax_class(softmax(base_logits[i]));
  }

  write_ground_truth(m.image_ids, truth, out_dir / m.ground_truth_path);

  const auto n_models = static_cast<std::ptrdiff_t>(m.models.size());
  std::exception_ptr failure;
  std::mutex failure_mutex;

#pragma omp parallel for schedule(dynamic) num_threads(std::max(workers, 1))
  for (std::ptrdiff_t mi = 0; mi < n_models; ++mi) {
    try {
      const auto& entry = m.models[static_cast<std::size_t>(mi)];
      std::vector<PredictionRecord> records;
      records.reserve(n_images);
      for (std::size_t i = 0; i < n_images; ++i) {
        const auto& id = m.image_ids[i];
        std::vector<double> cam;
        std::vector<double> z;
        if (entry.model.is_baseline()) {
          cam = base[i];
          z = base_logits[i];
        } else {
          const std::string tag = *entry.model.augmentation + "/" + *entry.model.seed + "/" + id;
          const auto& field = cluster_fields[cluster_of[static_cast<std::size_t>(mi) - 1]][i];
          Stream nrng(spec.master_seed, "noise/" + tag);
          const auto noise = smooth_field(nrng, spec.size);
          cam.resize(n_pixels);
          for (std::size_t j = 0; j < n_pixels; ++j) {
            cam[j] = (1.0 - w) * base[i][j] + w * (field[j] + spec.noise * (2.0 * noise[j] - 1.0));
          }
          min_max_normalize(cam);

          Stream prng(spec.master_seed, "pred/" + tag);
          z = base_logits[i];
          for (auto& x : z) x += w * 3.0 * prng.normal();
          if (prng.uniform() < spec.agreement) move_max_to(z, base_predicted[i]);
        }
        write_cam(validate_cam(spec.size, spec.size, cam), m.cam_path(entry, id));
        records.push_back(validate_prediction(id, softmax(z), std::nullopt, spec.classes));
      }
      write_predictions(records, spec.classes, m.resolve(entry.predictions_path));
    } catch (...) {
      std::lock_guard lock(failure_mutex);
      if (!failure) failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);

  write_manifest(m, out_dir / "manifest.json");
  return m;
}

}  // namespace camdiff
