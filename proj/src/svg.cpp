#include "camdiff/svg.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

namespace camdiff {
namespace {

constexpr const char* kFont = "font-family=\"sans-serif\"";

struct Rgb {
  int r, g, b;
};

Rgb lerp(Rgb a, Rgb b, double t) {
  auto mix = [t](int x, int y) { return static_cast<int>(std::lround(x + (y - x) * t)); };
  return {mix(a.r, b.r), mix(a.g, b.g), mix(a.b, b.b)};
}

std::string hex(Rgb c) { return fmt::format("#{:02x}{:02x}{:02x}", c.r, c.g, c.b); }

// Blue (-1) -> white (0) -> red (+1).
Rgb diverging(double v) {
  const Rgb blue{59, 76, 192}, white{247, 247, 247}, red{180, 4, 38};
  v = std::clamp(v, -1.0, 1.0);
  return v < 0.0 ? lerp(white, blue, -v) : lerp(white, red, v);
}

// Black -> red -> yellow -> white over [0, 1].
Rgb heat(double v) {
  const Rgb stops[] = {{0, 0, 0}, {190, 20, 10}, {250, 210, 30}, {255, 255, 255}};
  v = std::clamp(v, 0.0, 1.0) * 3.0;
  const auto i = std::min(static_cast<std::size_t>(v), std::size_t{2});
  return lerp(stops[i], stops[i + 1], v - static_cast<double>(i));
}

std::string header(int width, int height, std::string_view title) {
  return fmt::format(
      "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
      "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{0}\" height=\"{1}\" viewBox=\"0 0 {0} {1}\">\n"
      "<rect x=\"0\" y=\"0\" width=\"{0}\" height=\"{1}\" fill=\"#ffffff\"/>\n"
      "<text x=\"{2}\" y=\"22\" text-anchor=\"middle\" font-size=\"15\" {3}>{4}</text>\n",
      width, height, width / 2, kFont, xml_escape(title));
}

struct Axis {
  double lo, hi;
  double top, bottom;  // pixel rows
  double y(double v) const { return bottom - (v - lo) / (hi - lo) * (bottom - top); }
};

Axis make_axis(double lo, double hi, double top, double bottom) {
  if (!(hi > lo)) {
    lo -= 0.5;
    hi += 0.5;
  }
  const double pad = (hi - lo) * 0.05;
  return {lo - pad, hi + pad, top, bottom};
}

std::string y_axis(const Axis& axis, double x, double right, std::string_view label) {
  std::string s = fmt::format("<line x1=\"{0:.2f}\" y1=\"{1:.2f}\" x2=\"{0:.2f}\" y2=\"{2:.2f}\" stroke=\"#000000\"/>\n",
                              x, axis.top, axis.bottom);
  for (int t = 0; t <= 5; ++t) {
    const double v = axis.lo + (axis.hi - axis.lo) * t / 5.0;
    const double y = axis.y(v);
    s += fmt::format("<line x1=\"{0:.2f}\" y1=\"{1:.2f}\" x2=\"{2:.2f}\" y2=\"{1:.2f}\" stroke=\"#dddddd\"/>\n", x, y,
                     right);
    s += fmt::format("<text x=\"{:.2f}\" y=\"{:.2f}\" text-anchor=\"end\" font-size=\"10\" {}>{:.3g}</text>\n",
                     x - 4, y + 3, kFont, v);
  }
  s += fmt::format(
      "<text x=\"14\" y=\"{0:.2f}\" transform=\"rotate(-90 14 {0:.2f})\" text-anchor=\"middle\" font-size=\"11\" "
      "{1}>{2}</text>\n",
      (axis.top + axis.bottom) / 2, kFont, xml_escape(label));
  return s;
}

}  // namespace

std::string xml_escape(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  for (char c : text) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      case '\'': out += "&apos;"; break;
      default: out += c;
    }
  }
  return out;
}

std::string render_boxplot(std::span<const std::pair<std::string, BoxplotStats>> boxes, std::string_view title,
                           std::string_view y_label) {
  if (boxes.empty()) throw Error("render boxplot: empty input");
  const double slot = 70.0, left = 60.0, top = 40.0, plot_h = 300.0;
  const int width = static_cast<int>(left + slot * static_cast<double>(boxes.size()) + 20);
  const int height = static_cast<int>(top + plot_h + 70);

  double lo = boxes.front().second.whisker_low, hi = boxes.front().second.whisker_high;
  for (const auto& [name, b] : boxes) {
    lo = std::min(lo, b.whisker_low);
    hi = std::max(hi, b.whisker_high);
    for (double o : b.outliers) {
      lo = std::min(lo, o);
      hi = std::max(hi, o);
    }
  }
  const Axis axis = make_axis(lo, hi, top, top + plot_h);

  std::string s = header(width, height, title);
  s += y_axis(axis, left, width - 10.0, y_label);
  for (std::size_t i = 0; i < boxes.size(); ++i) {
    const auto& [name, b] = boxes[i];
    const double cx = left + slot * (static_cast<double>(i) + 0.5);
    const double half = slot * 0.3;
    s += "<g class=\"box\">\n";
    s += fmt::format("<line x1=\"{0:.2f}\" y1=\"{1:.2f}\" x2=\"{0:.2f}\" y2=\"{2:.2f}\" stroke=\"#000000\"/>\n", cx,
                     axis.y(b.whisker_high), axis.y(b.q3));
    s += fmt::format("<line x1=\"{0:.2f}\" y1=\"{1:.2f}\" x2=\"{0:.2f}\" y2=\"{2:.2f}\" stroke=\"#000000\"/>\n", cx,
                     axis.y(b.q1), axis.y(b.whisker_low));
    for (double w : {b.whisker_low, b.whisker_high}) {
      s += fmt::format("<line x1=\"{:.2f}\" y1=\"{:.2f}\" x2=\"{:.2f}\" y2=\"{:.2f}\" stroke=\"#000000\"/>\n",
                       cx - half / 2, axis.y(w), cx + half / 2, axis.y(w));
    }
    s += fmt::format(
        "<rect x=\"{:.2f}\" y=\"{:.2f}\" width=\"{:.2f}\" height=\"{:.2f}\" fill=\"#9ecae1\" stroke=\"#000000\"/>\n",
        cx - half, axis.y(b.q3), 2 * half, std::max(axis.y(b.q1) - axis.y(b.q3), 0.5));
    s += fmt::format(
        "<line x1=\"{:.2f}\" y1=\"{:.2f}\" x2=\"{:.2f}\" y2=\"{:.2f}\" stroke=\"#d62728\" stroke-width=\"2\"/>\n",
        cx - half, axis.y(b.median), cx + half, axis.y(b.median));
    for (double o : b.outliers) {
      s += fmt::format("<circle cx=\"{:.2f}\" cy=\"{:.2f}\" r=\"2\" fill=\"none\" stroke=\"#555555\"/>\n", cx,
                       axis.y(o));
    }
    s += "</g>\n";
    s += fmt::format(
        "<text x=\"{0:.2f}\" y=\"{1:.2f}\" transform=\"rotate(30 {0:.2f} {1:.2f})\" font-size=\"11\" {2}>{3}</text>\n",
        cx - 10, top + plot_h + 16, kFont, xml_escape(name));
  }
  s += "</svg>\n";
  return s;
}

std::string render_heatmap(const CorrelationMap& map, std::string_view title) {
  const std::size_t n = map.size();
  if (n == 0 || map.matrix.size() != n * n) throw Error("render heatmap: malformed map");
  const double cell = 60.0, left = 120.0, top = 50.0;
  const int width = static_cast<int>(left + cell * static_cast<double>(n) + 20);
  const int height = static_cast<int>(top + cell * static_cast<double>(n) + 110);

  std::string s = header(width, height, title);
  for (std::size_t r = 0; r < n; ++r) {
    const double y = top + cell * static_cast<double>(r);
    s += fmt::format("<text x=\"{:.2f}\" y=\"{:.2f}\" text-anchor=\"end\" font-size=\"11\" {}>{}</text>\n", left - 6,
                     y + cell / 2 + 4, kFont, xml_escape(map.augmentations[r]));
    for (std::size_t c = 0; c < n; ++c) {
      const double x = left + cell * static_cast<double>(c);
      const auto v = map.at(r, c);
      const std::string fill = v ? hex(diverging(*v)) : "#bdbdbd";
      const std::string text = v ? fmt::format("{:.2f}", *v) : "NA";
      s += fmt::format(
          "<rect class=\"cell\" x=\"{:.2f}\" y=\"{:.2f}\" width=\"{:.2f}\" height=\"{:.2f}\" fill=\"{}\" "
          "stroke=\"#ffffff\"/>\n",
          x, y, cell, cell, fill);
      s += fmt::format("<text x=\"{:.2f}\" y=\"{:.2f}\" text-anchor=\"middle\" font-size=\"12\" {}>{}</text>\n",
                       x + cell / 2, y + cell / 2 + 4, kFont, text);
    }
  }
  const double label_y = top + cell * static_cast<double>(n) + 14;
  for (std::size_t c = 0; c < n; ++c) {
    const double x = left + cell * (static_cast<double>(c) + 0.5);
    s += fmt::format(
        "<text x=\"{0:.2f}\" y=\"{1:.2f}\" transform=\"rotate(30 {0:.2f} {1:.2f})\" font-size=\"11\" {2}>{3}</text>\n",
        x - 10, label_y, kFont, xml_escape(map.augmentations[c]));
  }
  // color legend over [-1, 1]
  const double legend_y = height - 30.0, legend_w = std::min(200.0, width - 40.0), legend_x = (width - legend_w) / 2;
  for (int i = 0; i < 20; ++i) {
    const double v = -1.0 + (i + 0.5) / 10.0;
    s += fmt::format("<rect x=\"{:.2f}\" y=\"{:.2f}\" width=\"{:.2f}\" height=\"10\" fill=\"{}\"/>\n",
                     legend_x + legend_w * i / 20.0, legend_y, legend_w / 20.0, hex(diverging(v)));
  }
  s += fmt::format("<text x=\"{:.2f}\" y=\"{:.2f}\" text-anchor=\"end\" font-size=\"10\" {}>-1</text>\n",
                   legend_x - 4, legend_y + 9, kFont);
  s += fmt::format("<text x=\"{:.2f}\" y=\"{:.2f}\" font-size=\"10\" {}>1</text>\n", legend_x + legend_w + 4,
                   legend_y + 9, kFont);
  s += "</svg>\n";
  return s;
}

std::string render_bars(std::span<const std::pair<std::string, double>> bars, std::string_view metric_name) {
  if (bars.empty()) throw Error("render bars: empty input");
  const double slot = 60.0, left = 60.0, top = 40.0, plot_h = 300.0;
  const int width = static_cast<int>(left + slot * static_cast<double>(bars.size()) + 20);
  const int height = static_cast<int>(top + plot_h + 70);
  double hi = 1.0;
  for (const auto& b : bars) hi = std::max(hi, b.second);
  const Axis axis{0.0, hi, top, top + plot_h};

  std::string s = header(width, height, metric_name);
  s += y_axis(axis, left, width - 10.0, metric_name);
  for (std::size_t i = 0; i < bars.size(); ++i) {
    const auto& [name, value] = bars[i];
    const double cx = left + slot * (static_cast<double>(i) + 0.5);
    const double y = axis.y(std::max(value, 0.0));
    s += fmt::format(
        "<rect class=\"bar\" x=\"{:.2f}\" y=\"{:.2f}\" width=\"{:.2f}\" height=\"{:.2f}\" fill=\"#4c72b0\"/>\n",
        cx - slot * 0.35, y, slot * 0.7, axis.bottom - y);
    s += fmt::format("<text x=\"{:.2f}\" y=\"{:.2f}\" text-anchor=\"middle\" font-size=\"10\" {}>{:.3f}</text>\n", cx,
                     y - 4, kFont, value);
    s += fmt::format(
        "<text x=\"{0:.2f}\" y=\"{1:.2f}\" transform=\"rotate(30 {0:.2f} {1:.2f})\" font-size=\"11\" {2}>{3}</text>\n",
        cx - 10, top + plot_h + 16, kFont, xml_escape(name));
  }
  s += "</svg>\n";
  return s;
}

std::string render_cam_grid(std::span<const std::pair<std::string, const Cam*>> cells, std::string_view title) {
  if (cells.empty()) throw Error("render cam grid: empty input");
  constexpr std::size_t kMaxSide = 64;
  const auto cols = static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(cells.size()))));
  const std::size_t rows = (cells.size() + cols - 1) / cols;
  const double cell_px = 160.0, gap = 30.0, top = 40.0, left = 10.0;
  const int width = static_cast<int>(left * 2 + (cell_px + 10) * static_cast<double>(cols));
  const int height = static_cast<int>(top + (cell_px + gap) * static_cast<double>(rows) + 10);

  std::string s = header(width, height, title);
  for (std::size_t k = 0; k < cells.size(); ++k) {
    const auto& [label, cam] = cells[k];
    const double ox = left + (cell_px + 10) * static_cast<double>(k % cols);
    const double oy = top + (cell_px + gap) * static_cast<double>(k / cols);
    s += fmt::format("<text x=\"{:.2f}\" y=\"{:.2f}\" text-anchor=\"middle\" font-size=\"11\" {}>{}</text>\n",
                     ox + cell_px / 2, oy + 12, kFont, xml_escape(label));
    const std::size_t step_r = (cam->height() + kMaxSide - 1) / kMaxSide;
    const std::size_t step_c = (cam->width() + kMaxSide - 1) / kMaxSide;
    const std::size_t out_h = (cam->height() + step_r - 1) / step_r;
    const std::size_t out_w = (cam->width() + step_c - 1) / step_c;
    const double px = cell_px / static_cast<double>(std::max(out_h, out_w));
    s += "<g class=\"cam\">\n";
    for (std::size_t r = 0; r < out_h; ++r) {
      for (std::size_t c = 0; c < out_w; ++c) {
        double sum = 0.0;
        std::size_t n = 0;
        for (std::size_t rr = r * step_r; rr < std::min((r + 1) * step_r, cam->height()); ++rr) {
          for (std::size_t cc = c * step_c; cc < std::min((c + 1) * step_c, cam->width()); ++cc) {
            sum += cam->at(rr, cc);
            ++n;
          }
        }
        s += fmt::format("<rect x=\"{:.2f}\" y=\"{:.2f}\" width=\"{:.2f}\" height=\"{:.2f}\" fill=\"{}\"/>\n",
                         ox + px * static_cast<double>(c), oy + 18 + px * static_cast<double>(r), px, px,
                         hex(heat(sum / static_cast<double>(n))));
      }
    }
    s += "</g>\n";
  }
  s += "</svg>\n";
  return s;
}

}  // namespace camdiff
