#include "sonarssl/svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

#include "sonarssl/error.hpp"

namespace sonarssl {

namespace {

constexpr double kWidth = 640.0, kHeight = 480.0;
constexpr double kLeft = 64.0, kRight = 472.0;   // plot box x extent
constexpr double kTop = 48.0, kBottom = 424.0;   // plot box y extent

const char* palette(std::size_t i) {
  static const char* kColors[] = {"#1f77b4", "#d62728", "#2ca02c",
                                  "#ff7f0e", "#9467bd", "#8c564b"};
  return kColors[i % (sizeof(kColors) / sizeof(kColors[0]))];
}

std::string esc(const std::string& s) {
  std::string out;
  out.reserve(s.size());
  for (char c : s) {
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

std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

std::string tick_label(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%g", v);
  return buf;
}

// Largest of {1,2,5}*10^k giving 4-6 intervals across the range.
double nice_step(double range) {
  double raw = range / 4.0;
  double mag = std::pow(10.0, std::floor(std::log10(raw)));
  double norm = raw / mag;
  double step = norm < 1.5 ? 1.0 : norm < 3.5 ? 2.0 : norm < 7.5 ? 5.0 : 10.0;
  return step * mag;
}

struct AxisMap {
  double x_min, x_max, y_min, y_max;
  bool x_log = false;

  double fx(double x) const {
    double t;
    if (x_log)
      t = (std::log10(x) - std::log10(x_min)) / (std::log10(x_max) - std::log10(x_min));
    else
      t = (x - x_min) / (x_max - x_min);
    return kLeft + std::clamp(t, 0.0, 1.0) * (kRight - kLeft);
  }
  double fy(double y) const {
    double t = (y - y_min) / (y_max - y_min);
    return kBottom - std::clamp(t, 0.0, 1.0) * (kBottom - kTop);
  }
};

std::vector<double> linear_ticks(double lo, double hi) {
  std::vector<double> ticks;
  double step = nice_step(hi - lo);
  double first = std::ceil(lo / step - 1e-9) * step;
  for (double t = first; t <= hi + step * 1e-9; t += step)
    ticks.push_back(std::abs(t) < step * 1e-9 ? 0.0 : t);
  return ticks;
}

std::vector<double> log_ticks(double lo, double hi) {
  std::vector<double> ticks;
  int first = static_cast<int>(std::ceil(std::log10(lo) - 1e-9));
  int last = static_cast<int>(std::floor(std::log10(hi) + 1e-9));
  for (int e = first; e <= last; ++e) ticks.push_back(std::pow(10.0, e));
  if (ticks.empty()) ticks = {lo, hi};  // less than a decade of range
  return ticks;
}

void check_series(const std::vector<PlotSeries>& series, bool allow_single_point) {
  if (series.empty()) throw InputError("svg: no series to plot");
  for (const auto& s : series) {
    if (s.x.size() != s.y.size()) throw InputError("svg: series '" + s.label + "' x/y mismatch");
    if (s.x.empty()) throw InputError("svg: series '" + s.label + "' is empty");
    if (!allow_single_point && s.x.size() < 2)
      throw InputError("svg: series '" + s.label + "' needs at least 2 points");
    for (std::size_t i = 0; i < s.x.size(); ++i)
      if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i]))
        throw InputError("svg: series '" + s.label + "' has non-finite coordinates");
  }
}

void open_svg(std::string& out, const std::string& title) {
  out += "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  out += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"640\" height=\"480\" "
         "viewBox=\"0 0 640 480\" font-family=\"sans-serif\">\n";
  out += "<rect x=\"0\" y=\"0\" width=\"640\" height=\"480\" fill=\"#ffffff\"/>\n";
  out += "<text x=\"" + num(kWidth / 2) + "\" y=\"28\" text-anchor=\"middle\" font-size=\"16\">" +
         esc(title) + "</text>\n";
}

void draw_frame_and_ticks(std::string& out, const AxisMap& map, const std::string& x_label,
                          const std::string& y_label) {
  std::vector<double> xt =
      map.x_log ? log_ticks(map.x_min, map.x_max) : linear_ticks(map.x_min, map.x_max);
  std::vector<double> yt = linear_ticks(map.y_min, map.y_max);
  for (double t : xt) {
    double px = map.fx(t);
    out += "<line x1=\"" + num(px) + "\" y1=\"" + num(kTop) + "\" x2=\"" + num(px) + "\" y2=\"" +
           num(kBottom) + "\" stroke=\"#dddddd\" stroke-width=\"1\"/>\n";
    out += "<text x=\"" + num(px) + "\" y=\"" + num(kBottom + 18) +
           "\" text-anchor=\"middle\" font-size=\"11\">" + tick_label(t) + "</text>\n";
  }
  for (double t : yt) {
    double py = map.fy(t);
    out += "<line x1=\"" + num(kLeft) + "\" y1=\"" + num(py) + "\" x2=\"" + num(kRight) +
           "\" y2=\"" + num(py) + "\" stroke=\"#dddddd\" stroke-width=\"1\"/>\n";
    out += "<text x=\"" + num(kLeft - 8) + "\" y=\"" + num(py + 4) +
           "\" text-anchor=\"end\" font-size=\"11\">" + tick_label(t) + "</text>\n";
  }
  out += "<rect x=\"" + num(kLeft) + "\" y=\"" + num(kTop) + "\" width=\"" +
         num(kRight - kLeft) + "\" height=\"" + num(kBottom - kTop) +
         "\" fill=\"none\" stroke=\"#000000\" stroke-width=\"1\"/>\n";
  out += "<text x=\"" + num((kLeft + kRight) / 2) + "\" y=\"" + num(kHeight - 16) +
         "\" text-anchor=\"middle\" font-size=\"13\">" + esc(x_label) + "</text>\n";
  double ly = (kTop + kBottom) / 2;
  out += "<text x=\"18\" y=\"" + num(ly) + "\" text-anchor=\"middle\" font-size=\"13\" " +
         "transform=\"rotate(-90 18 " + num(ly) + ")\">" + esc(y_label) + "</text>\n";
}

void draw_legend(std::string& out, const std::vector<PlotSeries>& series, bool marker_style) {
  double lx = kRight + 14.0;
  for (std::size_t i = 0; i < series.size(); ++i) {
    double ly = kTop + 12.0 + 20.0 * static_cast<double>(i);
    if (marker_style) {
      out += "<circle cx=\"" + num(lx + 9) + "\" cy=\"" + num(ly - 4) + "\" r=\"4\" fill=\"" +
             palette(i) + "\"/>\n";
    } else {
      out += "<line x1=\"" + num(lx) + "\" y1=\"" + num(ly - 4) + "\" x2=\"" + num(lx + 18) +
             "\" y2=\"" + num(ly - 4) + "\" stroke=\"" + std::string(palette(i)) +
             "\" stroke-width=\"2\"/>\n";
    }
    out += "<text x=\"" + num(lx + 24) + "\" y=\"" + num(ly) + "\" font-size=\"12\">" +
           esc(series[i].label) + "</text>\n";
  }
}

}  // namespace

std::string render_line_chart(const PlotSpec& spec, const std::vector<PlotSeries>& series) {
  check_series(series, /*allow_single_point=*/true);
  if (!(spec.x_max > spec.x_min) || !(spec.y_max > spec.y_min))
    throw InputError("svg: degenerate axis range");
  if (spec.x_log && !(spec.x_min > 0.0)) throw InputError("svg: log axis requires x_min > 0");
  if (spec.x_log)
    for (const auto& s : series)
      for (double x : s.x)
        if (!(x > 0.0)) throw InputError("svg: log axis requires positive x values");

  AxisMap map{spec.x_min, spec.x_max, spec.y_min, spec.y_max, spec.x_log};
  std::string out;
  open_svg(out, spec.title);
  draw_frame_and_ticks(out, map, spec.x_label, spec.y_label);
  for (std::size_t i = 0; i < series.size(); ++i) {
    const auto& s = series[i];
    if (s.x.size() == 1) {
      out += "<circle cx=\"" + num(map.fx(s.x[0])) + "\" cy=\"" + num(map.fy(s.y[0])) +
             "\" r=\"3\" fill=\"" + palette(i) + "\"/>\n";
      continue;
    }
    out += "<polyline fill=\"none\" stroke=\"" + std::string(palette(i)) +
           "\" stroke-width=\"1.5\" points=\"";
    for (std::size_t j = 0; j < s.x.size(); ++j) {
      if (j != 0) out += ' ';
      out += num(map.fx(s.x[j])) + "," + num(map.fy(s.y[j]));
    }
    out += "\"/>\n";
    if (spec.draw_markers)
      for (std::size_t j = 0; j < s.x.size(); ++j)
        out += "<circle cx=\"" + num(map.fx(s.x[j])) + "\" cy=\"" + num(map.fy(s.y[j])) +
               "\" r=\"3\" fill=\"" + palette(i) + "\"/>\n";
  }
  draw_legend(out, series, /*marker_style=*/false);
  out += "</svg>\n";
  return out;
}

std::string render_scatter_chart(const std::string& title, const std::string& x_label,
                                 const std::string& y_label,
                                 const std::vector<PlotSeries>& groups) {
  check_series(groups, /*allow_single_point=*/true);
  double x_lo = groups[0].x[0], x_hi = x_lo, y_lo = groups[0].y[0], y_hi = y_lo;
  for (const auto& g : groups)
    for (std::size_t i = 0; i < g.x.size(); ++i) {
      x_lo = std::min(x_lo, g.x[i]);
      x_hi = std::max(x_hi, g.x[i]);
      y_lo = std::min(y_lo, g.y[i]);
      y_hi = std::max(y_hi, g.y[i]);
    }
  auto pad = [](double& lo, double& hi) {
    double margin = (hi - lo) * 0.05;
    if (margin <= 0.0) margin = 1.0;
    lo -= margin;
    hi += margin;
  };
  pad(x_lo, x_hi);
  pad(y_lo, y_hi);

  AxisMap map{x_lo, x_hi, y_lo, y_hi, false};
  std::string out;
  open_svg(out, title);
  draw_frame_and_ticks(out, map, x_label, y_label);
  for (std::size_t i = 0; i < groups.size(); ++i) {
    const auto& g = groups[i];
    for (std::size_t j = 0; j < g.x.size(); ++j)
      out += "<circle cx=\"" + num(map.fx(g.x[j])) + "\" cy=\"" + num(map.fy(g.y[j])) +
             "\" r=\"3\" fill=\"" + std::string(palette(i)) + "\" fill-opacity=\"0.7\"/>\n";
  }
  draw_legend(out, groups, /*marker_style=*/true);
  out += "</svg>\n";
  return out;
}

}  // namespace sonarssl
