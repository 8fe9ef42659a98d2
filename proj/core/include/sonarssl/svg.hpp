#pragma once

#include <string>
#include <vector>

namespace sonarssl {

// Self-contained SVG chart rendering: text-based, diffable, no rendering
// dependency, byte-identical output for identical inputs.

struct PlotSeries {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;  // paired with x
};

struct PlotSpec {
  std::string title;
  std::string x_label;
  std::string y_label;
  double x_min = 0.0;
  double x_max = 1.0;
  double y_min = 0.0;
  double y_max = 1.0;
  bool x_log = false;  // ticks at powers of ten; requires x_min > 0
  bool draw_markers = false;
};

// Polyline chart with axes, gridlines and a right-hand legend; series colors
// cycle through a fixed palette. Points are clamped to the plot box.
// InputError on empty input, mismatched series, non-finite coordinates, or a
// degenerate axis range.
std::string render_line_chart(const PlotSpec& spec, const std::vector<PlotSeries>& series);

// Scatter plot with axes auto-scaled to the data (5% margin); one palette
// color per group. InputError on empty input or non-finite coordinates.
std::string render_scatter_chart(const std::string& title, const std::string& x_label,
                                 const std::string& y_label,
                                 const std::vector<PlotSeries>& groups);

}  // namespace sonarssl
