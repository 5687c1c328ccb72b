#include "camdiff/types.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fmt/format.h>

namespace camdiff {

Cam validate_cam(std::size_t height, std::size_t width, std::span<const double> raw) {
  if (height == 0 || width == 0) {
    throw Error(fmt::format("cam: empty dimensions {}x{}", height, width));
  }
  if (height > raw.size() / width || height * width != raw.size()) {
    throw Error(fmt::format("cam: dimension mismatch, {}x{} but {} values", height, width,
                            raw.size()));
  }
  std::vector<double> values(raw.begin(), raw.end());
  for (std::size_t j = 0; j < values.size(); ++j) {
    double& v = values[j];
    if (!std::isfinite(v)) {
      throw Error(fmt::format("cam: non-finite value at pixel {}", j));
    }
    if (v < 0.0) {
      if (v < -kCamTolerance) {
        throw Error(fmt::format("cam: value out of range at pixel {}: {}", j, v));
      }
      v = 0.0;
    } else if (v > 1.0) {
      if (v > 1.0 + kCamTolerance) {
        throw Error(fmt::format("cam: value out of range at pixel {}: {}", j, v));
      }
      v = 1.0;
    }
  }
  return Cam(height, width, std::move(values));
}

ModelId ModelId::augmented(std::string augmentation, std::string seed) {
  if (augmentation.empty() || seed.empty()) {
    throw Error("model id: augmented model needs both augmentation and seed");
  }
  return ModelId{std::move(augmentation), std::move(seed)};
}

std::string ModelId::label() const {
  if (is_baseline()) return "baseline";
  return *augmentation + "/" + *seed;
}

std::size_t argmax_class(std::span<const double> probabilities) {
  std::size_t best = 0;
  for (std::size_t c = 1; c < probabilities.size(); ++c) {
    if (probabilities[c] > probabilities[best]) best = c;
  }
  return best;
}

PredictionRecord validate_prediction(std::string image_id, std::vector<double> probabilities,
                                     std::optional<std::size_t> predicted_class,
                                     std::size_t class_count) {
  if (probabilities.size() != class_count) {
    throw Error(fmt::format("prediction {}: length mismatch, {} probabilities for {} classes",
                            image_id, probabilities.size(), class_count));
  }
  if (class_count == 0) {
    throw Error(fmt::format("prediction {}: zero classes", image_id));
  }
  double sum = 0.0;
  for (double p : probabilities) {
    if (!std::isfinite(p)) throw Error(fmt::format("prediction {}: non-finite probability", image_id));
    if (p < 0.0) throw Error(fmt::format("prediction {}: negative probability {}", image_id, p));
    if (p > 1.0) throw Error(fmt::format("prediction {}: probability above one {}", image_id, p));
    sum += p;
  }
  if (std::abs(sum - 1.0) > kProbabilitySumTolerance) {
    throw Error(fmt::format("prediction {}: sum deviates from one ({})", image_id, sum));
  }
  const std::size_t best = argmax_class(probabilities);
  if (predicted_class && *predicted_class != best) {
    throw Error(fmt::format("prediction {}: argmax mismatch, predicted {} but argmax is {}",
                            image_id, *predicted_class, best));
  }
  return PredictionRecord{std::move(image_id), std::move(probabilities), best};
}

std::optional<std::size_t> GroundTruthTable::label_of(const std::string& image_id) const {
  auto it = labels.find(image_id);
  if (it == labels.end()) return std::nullopt;
  return it->second;
}

std::string_view to_string(MetricKind kind) {
  switch (kind) {
    case MetricKind::mad: return "mad";
    case MetricKind::msd: return "msd";
    case MetricKind::pearson: return "pearson";
    case MetricKind::spearman: return "spearman";
    case MetricKind::overlap_rate: return "overlap_rate";
    case MetricKind::class_kld: return "class_kld";
  }
  return "unknown";
}

std::string_view to_string(UndefinedReason reason) {
  switch (reason) {
    case UndefinedReason::none: return "";
    case UndefinedReason::zero_variance: return "zero_variance";
    case UndefinedReason::too_few_pixels: return "too_few_pixels";
    case UndefinedReason::no_defined_seed: return "no_defined_seed";
  }
  return "unknown";
}

namespace {

std::optional<MetricKind> kind_from_name(std::string_view name) {
  for (auto kind : {MetricKind::mad, MetricKind::msd, MetricKind::pearson, MetricKind::spearman,
                    MetricKind::overlap_rate, MetricKind::class_kld}) {
    if (to_string(kind) == name) return kind;
  }
  return std::nullopt;
}

// Shortest text that parses back to the same double.
std::string format_parameter(double v) {
  std::string s = fmt::format("{:g}", v);
  double back = 0.0;
  std::from_chars(s.data(), s.data() + s.size(), back);
  if (back != v) s = fmt::format("{}", v);
  return s;
}

}  // namespace

MetricId MetricId::make(MetricKind kind, std::optional<double> parameter) {
  switch (kind) {
    case MetricKind::overlap_rate:
      if (!parameter || !(*parameter > 0.0 && *parameter < 100.0)) {
        throw Error("metric overlap_rate: parameter Y must lie in (0, 100)");
      }
      break;
    case MetricKind::class_kld:
      if (!parameter) parameter = 1e-10;
      if (!(*parameter >= 0.0) || !std::isfinite(*parameter)) {
        throw Error("metric class_kld: epsilon must be >= 0");
      }
      break;
    default:
      if (parameter) {
        throw Error(fmt::format("metric {} takes no parameter", camdiff::to_string(kind)));
      }
  }
  return MetricId(kind, parameter);
}

MetricId MetricId::parse(std::string_view text) {
  const auto at = text.find('@');
  const std::string_view name = text.substr(0, at);
  const auto kind = kind_from_name(name);
  if (!kind) throw Error(fmt::format("unknown metric '{}'", name));
  std::optional<double> parameter;
  if (at != std::string_view::npos) {
    const std::string_view num = text.substr(at + 1);
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(num.data(), num.data() + num.size(), v);
    if (ec != std::errc{} || ptr != num.data() + num.size() || num.empty()) {
      throw Error(fmt::format("metric '{}': bad parameter '{}'", name, num));
    }
    parameter = v;
  }
  return make(*kind, parameter);
}

std::string MetricId::to_string() const {
  std::string s(camdiff::to_string(kind_));
  if (parameter_) s += "@" + format_parameter(*parameter_);
  return s;
}

std::string MetricId::file_stem() const {
  std::string s = to_string();
  std::replace(s.begin(), s.end(), '@', '_');
  return s;
}

}  // namespace camdiff
