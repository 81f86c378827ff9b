#include "matchope/harness/plots.hpp"

#include "matchope/errors.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <set>

namespace matchope::harness {
namespace {

constexpr double kWidth = 720, kHeight = 420;
constexpr double kLeft = 80, kRight = 170, kTop = 40, kBottom = 60;
constexpr const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd",
                                    "#8c564b", "#e377c2", "#7f7f7f", "#17becf", "#bcbd22"};

std::string fmt(const char* pattern, double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, pattern, x);
  return buf;
}

std::string escape(const std::string& text) {
  std::string out;
  for (char ch : text) {
    switch (ch) {
      case '<':
        out += "&lt;";
        break;
      case '>':
        out += "&gt;";
        break;
      case '&':
        out += "&amp;";
        break;
      default:
        out += ch;
    }
  }
  return out;
}

struct Series {
  std::string name;
  // (x position in [0, 1], transformed y)
  std::vector<std::pair<double, double>> points;
};

struct Tick {
  double at;
  std::string label;
};

// Plots series on a frame whose y range is [y_lo, y_hi] in transformed units.
std::string render_chart(const std::string& title, const std::string& x_label, const std::string& y_label,
                         const std::vector<Series>& series, const std::vector<Tick>& x_ticks,
                         const std::vector<Tick>& y_ticks, double y_lo, double y_hi) {
  const double pw = kWidth - kLeft - kRight, ph = kHeight - kTop - kBottom;
  auto px = [&](double x) { return kLeft + x * pw; };
  auto py = [&](double y) { return kTop + (1.0 - (y - y_lo) / (y_hi - y_lo)) * ph; };

  std::string out = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + fmt("%.0f", kWidth) + "\" height=\"" +
                    fmt("%.0f", kHeight) + "\" viewBox=\"0 0 " + fmt("%.0f", kWidth) + " " + fmt("%.0f", kHeight) +
                    "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  out += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  out += "<text x=\"" + fmt("%.2f", kLeft + pw / 2) + "\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">" +
         escape(title) + "</text>\n";
  out += "<rect x=\"" + fmt("%.2f", kLeft) + "\" y=\"" + fmt("%.2f", kTop) + "\" width=\"" + fmt("%.2f", pw) +
         "\" height=\"" + fmt("%.2f", ph) + "\" fill=\"none\" stroke=\"black\"/>\n";
  for (const auto& t : x_ticks) {
    const double x = px(t.at);
    out += "<line x1=\"" + fmt("%.2f", x) + "\" y1=\"" + fmt("%.2f", kTop + ph) + "\" x2=\"" + fmt("%.2f", x) +
           "\" y2=\"" + fmt("%.2f", kTop + ph + 5) + "\" stroke=\"black\"/>\n";
    out += "<text x=\"" + fmt("%.2f", x) + "\" y=\"" + fmt("%.2f", kTop + ph + 18) + "\" text-anchor=\"middle\">" +
           escape(t.label) + "</text>\n";
  }
  for (const auto& t : y_ticks) {
    const double y = py(t.at);
    out += "<line x1=\"" + fmt("%.2f", kLeft - 5) + "\" y1=\"" + fmt("%.2f", y) + "\" x2=\"" + fmt("%.2f", kLeft + pw) +
           "\" y2=\"" + fmt("%.2f", y) + "\" stroke=\"#dddddd\"/>\n";
    out += "<text x=\"" + fmt("%.2f", kLeft - 8) + "\" y=\"" + fmt("%.2f", y + 4) + "\" text-anchor=\"end\">" +
           escape(t.label) + "</text>\n";
  }
  out += "<text x=\"" + fmt("%.2f", kLeft + pw / 2) + "\" y=\"" + fmt("%.2f", kHeight - 15) +
         "\" text-anchor=\"middle\">" + escape(x_label) + "</text>\n";
  out += "<text x=\"18\" y=\"" + fmt("%.2f", kTop + ph / 2) + "\" text-anchor=\"middle\" transform=\"rotate(-90 18 " +
         fmt("%.2f", kTop + ph / 2) + ")\">" + escape(y_label) + "</text>\n";

  for (std::size_t s = 0; s < series.size(); ++s) {
    const char* color = kPalette[s % std::size(kPalette)];
    const auto& pts = series[s].points;
    if (pts.size() >= 2) {
      out += "<polyline fill=\"none\" stroke=\"" + std::string(color) + "\" stroke-width=\"2\" points=\"";
      for (std::size_t k = 0; k < pts.size(); ++k) {
        if (k > 0) out += " ";
        out += fmt("%.2f", px(pts[k].first)) + "," + fmt("%.2f", py(pts[k].second));
      }
      out += "\"/>\n";
    }
    for (const auto& [x, y] : pts) {
      out += "<circle cx=\"" + fmt("%.2f", px(x)) + "\" cy=\"" + fmt("%.2f", py(y)) + "\" r=\"3\" fill=\"" +
             std::string(color) + "\"/>\n";
    }
    const double ly = kTop + 10 + 18 * static_cast<double>(s);
    out += "<line x1=\"" + fmt("%.2f", kLeft + pw + 15) + "\" y1=\"" + fmt("%.2f", ly) + "\" x2=\"" +
           fmt("%.2f", kLeft + pw + 40) + "\" y2=\"" + fmt("%.2f", ly) + "\" stroke=\"" + color +
           "\" stroke-width=\"2\"/>\n";
    out += "<text x=\"" + fmt("%.2f", kLeft + pw + 46) + "\" y=\"" + fmt("%.2f", ly + 4) + "\">" +
           escape(series[s].name) + "</text>\n";
  }
  out += "</svg>\n";
  return out;
}

std::vector<Tick> linear_ticks(double lo, double hi) {
  std::vector<Tick> ticks;
  for (int k = 0; k <= 4; ++k) {
    const double v = lo + (hi - lo) * k / 4.0;
    ticks.push_back({v, fmt("%.3g", v)});
  }
  return ticks;
}

double metric_value(const ReportRow& row, const std::string& metric) {
  if (metric == "mse") return row.mse;
  if (metric == "squared_bias") return row.squared_bias;
  if (metric == "variance") return row.variance;
  if (metric == "error_rate") return row.error_rate;
  throw ConfigError("unknown plot metric '" + metric + "'");
}

}  // namespace

std::string render_metric_svg(const ExperimentReport& report, const std::string& axis, const std::string& metric) {
  const bool log_y = metric == "mse" || metric == "variance";
  std::vector<const ReportRow*> rows;
  std::set<double> xs;
  std::vector<std::string> names;
  for (const auto& row : report.rows) {
    if (row.axis != axis) continue;
    metric_value(row, metric);
    rows.push_back(&row);
    xs.insert(row.axis_value);
    if (std::find(names.begin(), names.end(), row.estimator) == names.end()) names.push_back(row.estimator);
  }
  if (rows.empty()) metric_value(ReportRow{}, metric);

  std::map<double, double> position;
  std::size_t i = 0;
  for (double x : xs) {
    position[x] = xs.size() == 1 ? 0.5 : static_cast<double>(i) / static_cast<double>(xs.size() - 1);
    ++i;
  }

  double lo = INFINITY, hi = -INFINITY;
  for (const auto* row : rows) {
    const double v = metric_value(*row, metric);
    if (!std::isfinite(v) || (log_y && !(v > 0.0))) continue;
    const double t = log_y ? std::log10(v) : v;
    lo = std::min(lo, t);
    hi = std::max(hi, t);
  }
  if (!std::isfinite(lo)) {
    lo = log_y ? -12.0 : 0.0;
    hi = lo + 1.0;
  }
  if (!log_y) lo = std::min(lo, 0.0);
  if (log_y) {
    lo = std::floor(lo) - (std::floor(lo) == lo ? 1.0 : 0.0);
    hi = std::ceil(hi);
  }
  if (!(hi > lo)) hi = lo + 1.0;

  std::vector<Series> series;
  for (const auto& name : names) {
    Series s{name, {}};
    for (const auto* row : rows) {
      if (row->estimator != name) continue;
      const double v = metric_value(*row, metric);
      double t = 0.0;
      if (log_y) {
        t = v > 0.0 && std::isfinite(v) ? std::log10(v) : lo;
      } else {
        t = std::isfinite(v) ? v : lo;
      }
      s.points.emplace_back(position[row->axis_value], t);
    }
    std::sort(s.points.begin(), s.points.end());
    series.push_back(std::move(s));
  }

  std::vector<Tick> x_ticks;
  for (const auto& [x, p] : position) x_ticks.push_back({p, fmt("%g", x)});
  std::vector<Tick> y_ticks;
  if (log_y) {
    const int step = std::max(1, static_cast<int>(std::ceil((hi - lo) / 6.0)));
    for (int e = static_cast<int>(lo); e <= static_cast<int>(hi); e += step) {
      y_ticks.push_back({static_cast<double>(e), "1e" + std::to_string(e)});
    }
  } else {
    y_ticks = linear_ticks(lo, hi);
  }
  return render_chart(metric + " vs " + axis, axis, log_y ? metric + " (log scale)" : metric, series, x_ticks, y_ticks,
                      lo, hi);
}

std::vector<std::filesystem::path> emit_plots(const ExperimentReport& report, const std::filesystem::path& dir) {
  std::vector<std::string> axes;
  for (const auto& row : report.rows) {
    if (std::find(axes.begin(), axes.end(), row.axis) == axes.end()) axes.push_back(row.axis);
  }
  std::vector<std::filesystem::path> written;
  for (const auto& axis : axes) {
    for (const char* metric : kPlotMetrics) {
      const auto path = dir / (axis + "_" + metric + ".svg");
      write_text_file(path, render_metric_svg(report, axis, metric));
      written.push_back(path);
    }
  }
  return written;
}

std::string render_learning_curve_svg(const OplReport& report) {
  std::vector<std::string> names;
  for (const auto& s : report.summaries) names.push_back(s.learner);
  std::size_t length = 0;
  for (const auto& r : report.runs) length = std::max(length, r.relative_curve.size());

  std::vector<Series> series;
  double lo = INFINITY, hi = -INFINITY;
  for (const auto& name : names) {
    std::vector<double> sum(length, 0.0);
    std::vector<int> count(length, 0);
    for (const auto& r : report.runs) {
      if (r.learner != name) continue;
      for (std::size_t t = 0; t < r.relative_curve.size(); ++t) {
        sum[t] += r.relative_curve[t];
        ++count[t];
      }
    }
    Series s{name, {}};
    for (std::size_t t = 0; t < length; ++t) {
      if (count[t] == 0) continue;
      const double y = sum[t] / count[t];
      const double x = length == 1 ? 0.5 : static_cast<double>(t) / static_cast<double>(length - 1);
      s.points.emplace_back(x, y);
      lo = std::min(lo, y);
      hi = std::max(hi, y);
    }
    series.push_back(std::move(s));
  }
  if (!std::isfinite(lo)) {
    lo = 0.0;
    hi = 1.0;
  }
  lo = std::min(lo, 1.0);
  hi = std::max(hi, 1.0);
  const double pad = hi > lo ? 0.05 * (hi - lo) : 0.5;
  lo -= pad;
  hi += pad;

  std::vector<Tick> x_ticks;
  if (length > 0) {
    const std::size_t last = length - 1;
    for (int k = 0; k <= 4; ++k) {
      const std::size_t t = last * static_cast<std::size_t>(k) / 4;
      x_ticks.push_back({last == 0 ? 0.5 : static_cast<double>(t) / static_cast<double>(last), std::to_string(t)});
      if (last == 0) break;
    }
  }
  return render_chart("true value relative to the logging policy", "iteration", "relative value", series, x_ticks,
                      linear_ticks(lo, hi), lo, hi);
}

}  // namespace matchope::harness
