#pragma once

#include "matchope/core.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace matchope::harness {

enum class ReportFormat { csv, json };

std::string to_string(ReportFormat format);
ReportFormat parse_report_format(std::string_view text);

/// One (axis value, estimator) cell of a sweep.
struct ReportRow {
  std::string axis;
  double axis_value = 0.0;
  std::string estimator;
  double mse = 0.0;
  double squared_bias = 0.0;
  double variance = 0.0;
  double error_rate = 0.0;
  double mean_estimate = 0.0;
  double true_value = 0.0;
  std::int64_t n_reps = 0;
  double se_mse = 0.0;

  friend bool operator==(const ReportRow&, const ReportRow&) = default;
};

/// Per axis value bookkeeping that is not part of the exported table.
struct AxisDiagnostics {
  double axis_value = 0.0;
  std::int64_t failed_replications = 0;
  std::int64_t fit_warnings = 0;
  /// First failure message, if any replication failed.
  std::string first_failure;
};

struct ExperimentReport {
  std::vector<ReportRow> rows;
  std::vector<AxisDiagnostics> diagnostics;
};

inline constexpr const char* kReportColumns =
    "axis,axis_value,estimator,mse,squared_bias,variance,error_rate,mean_estimate,true_value,n_reps,se_mse";

/// Canonical serialization: numbers use 17 significant digits, so
/// parse_report(format_report(r)) reproduces every row exactly.
std::string format_report(const ExperimentReport& report, ReportFormat format);
ExperimentReport parse_report(std::string_view text, ReportFormat format);

void export_report(const ExperimentReport& report, const std::filesystem::path& path, ReportFormat format);
ExperimentReport read_report(const std::filesystem::path& path, ReportFormat format);

/// "%.17g".
std::string format_number(double x);

/// Writes `text` to `path`, creating parent directories. Throws ConfigError
/// when the file cannot be written.
void write_text_file(const std::filesystem::path& path, std::string_view text);
std::string read_text_file(const std::filesystem::path& path);

}  // namespace matchope::harness
