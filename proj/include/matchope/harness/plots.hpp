#pragma once

#include "matchope/harness/opl_experiment.hpp"
#include "matchope/harness/report.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace matchope::harness {

/// Metrics drawn by emit_plots, in file order.
inline constexpr const char* kPlotMetrics[] = {"mse", "squared_bias", "variance", "error_rate"};

/// SVG of one metric against the axis, one series per estimator. mse and
/// variance use a log10 y-axis; non-positive values sit on the bottom edge.
std::string render_metric_svg(const ExperimentReport& report, const std::string& axis, const std::string& metric);

/// Writes <dir>/<axis>_<metric>.svg for every axis in the report and every
/// metric. Returns the written paths.
std::vector<std::filesystem::path> emit_plots(const ExperimentReport& report, const std::filesystem::path& dir);

/// Mean relative true value per iteration, one series per learner.
std::string render_learning_curve_svg(const OplReport& report);

}  // namespace matchope::harness
