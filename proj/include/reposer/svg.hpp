#pragma once

#include <string>
#include <vector>

namespace reposer {

struct Series {
  std::string name;
  std::vector<double> x;
  std::vector<double> y;
  // Optional error bars; empty or same length as y.
  std::vector<double> lo;
  std::vector<double> hi;
};

struct PlotSpec {
  std::string title;
  std::string x_label;
  std::string y_label;
  bool log_x = false;
  // Fixed y range when lo < hi, otherwise fitted to the data.
  double y_min = 0.0;
  double y_max = 0.0;
};

/// Line chart with a marker at every point. Output depends only on the inputs.
std::string line_plot_svg(const std::vector<Series>& series, const PlotSpec& spec);

/// Matrix of values in [0, 1]; cell labels show the value, axis labels are
/// taken verbatim from the given strings.
std::string heatmap_svg(const std::vector<std::vector<double>>& values, const std::vector<std::string>& row_labels,
                        const std::vector<std::string>& col_labels, const PlotSpec& spec);

}  // namespace reposer
