#include "reposer/svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <stdexcept>

namespace reposer {

namespace {

constexpr double kWidth = 640, kHeight = 420;
constexpr double kLeft = 70, kRight = 150, kTop = 40, kBottom = 60;

const char* const kColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2", "#17becf"};

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

std::string tick_label(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.4g", v);
  return buf;
}

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

std::string text(double x, double y, const std::string& s, const char* anchor = "middle", int size = 12,
                 const std::string& extra = "") {
  return "<text x=\"" + num(x) + "\" y=\"" + num(y) + "\" font-size=\"" + std::to_string(size) +
         "\" text-anchor=\"" + anchor + "\"" + extra + ">" + escape(s) + "</text>\n";
}

std::string header(double w, double h) {
  return "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + num(w) + "\" height=\"" + num(h) +
         "\" viewBox=\"0 0 " + num(w) + " " + num(h) + "\" font-family=\"sans-serif\">\n" +
         "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
}

}  // namespace

std::string line_plot_svg(const std::vector<Series>& series, const PlotSpec& spec) {
  double x0 = INFINITY, x1 = -INFINITY, y0 = INFINITY, y1 = -INFINITY;
  auto tx = [&](double x) { return spec.log_x ? std::log10(x) : x; };
  for (const Series& s : series) {
    if (s.x.size() != s.y.size()) throw std::invalid_argument("plot series '" + s.name + "': x and y differ in length");
    if ((!s.lo.empty() && s.lo.size() != s.y.size()) || (!s.hi.empty() && s.hi.size() != s.y.size()))
      throw std::invalid_argument("plot series '" + s.name + "': error bars do not match the points");
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      if (spec.log_x && !(s.x[i] > 0)) throw std::invalid_argument("log axis needs positive x values");
      x0 = std::min(x0, tx(s.x[i]));
      x1 = std::max(x1, tx(s.x[i]));
      y0 = std::min({y0, s.y[i], s.lo.empty() ? s.y[i] : s.lo[i]});
      y1 = std::max({y1, s.y[i], s.hi.empty() ? s.y[i] : s.hi[i]});
    }
  }
  if (!std::isfinite(x0)) x0 = 0, x1 = 1, y0 = 0, y1 = 1;
  if (spec.y_min < spec.y_max) y0 = spec.y_min, y1 = spec.y_max;
  if (x1 - x0 < 1e-12) x0 -= 0.5, x1 += 0.5;
  if (y1 - y0 < 1e-12) y0 -= 0.5, y1 += 0.5;

  const double pw = kWidth - kLeft - kRight, ph = kHeight - kTop - kBottom;
  auto px = [&](double x) { return kLeft + (tx(x) - x0) / (x1 - x0) * pw; };
  auto py = [&](double y) { return kTop + (1.0 - (y - y0) / (y1 - y0)) * ph; };

  std::string out = header(kWidth, kHeight);
  out += text(kWidth / 2, 22, spec.title, "middle", 15);
  out += "<rect x=\"" + num(kLeft) + "\" y=\"" + num(kTop) + "\" width=\"" + num(pw) + "\" height=\"" + num(ph) +
         "\" fill=\"none\" stroke=\"black\"/>\n";
  for (int k = 0; k <= 4; ++k) {
    const double fx = x0 + (x1 - x0) * k / 4.0, fy = y0 + (y1 - y0) * k / 4.0;
    const double gx = kLeft + pw * k / 4.0, gy = py(fy);
    out += "<line x1=\"" + num(gx) + "\" y1=\"" + num(kTop + ph) + "\" x2=\"" + num(gx) + "\" y2=\"" +
           num(kTop + ph + 5) + "\" stroke=\"black\"/>\n";
    out += text(gx, kTop + ph + 18, tick_label(spec.log_x ? std::pow(10.0, fx) : fx), "middle", 11);
    out += "<line x1=\"" + num(kLeft - 5) + "\" y1=\"" + num(gy) + "\" x2=\"" + num(kLeft) + "\" y2=\"" + num(gy) +
           "\" stroke=\"black\"/>\n";
    out += text(kLeft - 8, gy + 4, tick_label(fy), "end", 11);
  }
  out += text(kLeft + pw / 2, kHeight - 15, spec.x_label);
  out += text(18, kTop + ph / 2, spec.y_label, "middle", 12,
              " transform=\"rotate(-90 18 " + num(kTop + ph / 2) + ")\"");

  for (std::size_t k = 0; k < series.size(); ++k) {
    const Series& s = series[k];
    const std::string color = kColors[k % std::size(kColors)];
    if (s.x.size() > 1) {
      out += "<polyline fill=\"none\" stroke=\"" + color + "\" stroke-width=\"2\" points=\"";
      for (std::size_t i = 0; i < s.x.size(); ++i) out += (i ? " " : "") + num(px(s.x[i])) + "," + num(py(s.y[i]));
      out += "\"/>\n";
    }
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      if (!s.lo.empty() && !s.hi.empty())
        out += "<line x1=\"" + num(px(s.x[i])) + "\" y1=\"" + num(py(s.lo[i])) + "\" x2=\"" + num(px(s.x[i])) +
               "\" y2=\"" + num(py(s.hi[i])) + "\" stroke=\"" + color + "\"/>\n";
      out += "<circle class=\"marker\" cx=\"" + num(px(s.x[i])) + "\" cy=\"" + num(py(s.y[i])) +
             "\" r=\"3.5\" fill=\"" + color + "\"/>\n";
    }
    const double ly = kTop + 12 + 18.0 * static_cast<double>(k);
    out += "<rect x=\"" + num(kWidth - kRight + 12) + "\" y=\"" + num(ly - 9) + "\" width=\"10\" height=\"10\" fill=\"" +
           color + "\"/>\n";
    out += text(kWidth - kRight + 27, ly, s.name, "start", 11);
  }
  out += "</svg>\n";
  return out;
}

std::string heatmap_svg(const std::vector<std::vector<double>>& values, const std::vector<std::string>& row_labels,
                        const std::vector<std::string>& col_labels, const PlotSpec& spec) {
  if (values.size() != row_labels.size()) throw std::invalid_argument("heatmap: one label per row required");
  for (const auto& row : values)
    if (row.size() != col_labels.size()) throw std::invalid_argument("heatmap: one label per column required");
  const double cell = 56, left = 90, top = 50;
  const double w = left + cell * static_cast<double>(col_labels.size()) + 30;
  const double h = top + cell * static_cast<double>(row_labels.size()) + 60;
  std::string out = header(w, h);
  out += text(w / 2, 24, spec.title, "middle", 15);
  for (std::size_t i = 0; i < values.size(); ++i) {
    for (std::size_t j = 0; j < col_labels.size(); ++j) {
      const double v = std::clamp(values[i][j], 0.0, 1.0);
      const int shade = static_cast<int>(std::lround(255.0 * (1.0 - v)));
      char fill[16];
      std::snprintf(fill, sizeof(fill), "#%02x%02xff", shade, shade);
      const double x = left + cell * static_cast<double>(j), y = top + cell * static_cast<double>(i);
      out += "<rect x=\"" + num(x) + "\" y=\"" + num(y) + "\" width=\"" + num(cell) + "\" height=\"" + num(cell) +
             "\" fill=\"" + fill + "\" stroke=\"white\"/>\n";
      out += text(x + cell / 2, y + cell / 2 + 4, num(values[i][j]), "middle", 11,
                  v > 0.5 ? " fill=\"white\"" : "");
    }
    out += text(left - 8, top + cell * (static_cast<double>(i) + 0.5) + 4, row_labels[i], "end", 11);
  }
  for (std::size_t j = 0; j < col_labels.size(); ++j)
    out += text(left + cell * (static_cast<double>(j) + 0.5), top + cell * static_cast<double>(row_labels.size()) + 18,
                col_labels[j], "middle", 11);
  out += text(left + cell * static_cast<double>(col_labels.size()) / 2, h - 12, spec.x_label);
  out += text(16, top + cell * static_cast<double>(row_labels.size()) / 2, spec.y_label, "middle", 12,
              " transform=\"rotate(-90 16 " + num(top + cell * static_cast<double>(row_labels.size()) / 2) + ")\"");
  out += "</svg>\n";
  return out;
}

}  // namespace reposer
