#include "matchope/harness/report.hpp"

#include "matchope/errors.hpp"

#include <json.hpp>

#include <algorithm>
#include <cctype>
#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <sstream>

namespace matchope::harness {
namespace {

using nlohmann::json;

void check_label(const std::string& text, const char* what) {
  if (text.empty() || text.find_first_of(",\"\r\n") != std::string::npos) {
    throw ValidationError(std::string(what) + " '" + text + "' is empty or contains a comma, quote or newline");
  }
}

std::string json_number(double x) { return std::isfinite(x) ? format_number(x) : "null"; }

double parse_double(const std::string& field, std::size_t line) {
  const char* begin = field.c_str();
  char* end = nullptr;
  errno = 0;
  const double x = std::strtod(begin, &end);
  if (field.empty() || end != begin + field.size() || errno == ERANGE) {
    throw ValidationError("line " + std::to_string(line) + ": '" + field + "' is not a number");
  }
  return x;
}

std::int64_t parse_count(const std::string& field, std::size_t line) {
  if (field.empty() || !std::all_of(field.begin(), field.end(), [](unsigned char ch) { return std::isdigit(ch); })) {
    throw ValidationError("line " + std::to_string(line) + ": '" + field + "' is not a count");
  }
  return std::stoll(field);
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream in(line);
  while (std::getline(in, field, ',')) out.push_back(field);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

double json_double(const json& row, const char* key) {
  const json& v = row.at(key);
  if (v.is_null()) return std::numeric_limits<double>::quiet_NaN();
  if (!v.is_number()) throw ValidationError(std::string("report field '") + key + "' is not a number");
  return v.get<double>();
}

}  // namespace

std::string to_string(ReportFormat format) { return format == ReportFormat::csv ? "csv" : "json"; }

ReportFormat parse_report_format(std::string_view text) {
  if (text == "csv") return ReportFormat::csv;
  if (text == "json") return ReportFormat::json;
  throw ConfigError("unknown report format '" + std::string(text) + "' (expected csv or json)");
}

std::string format_number(double x) {
  if (x == 0.0) return "0";  // no "-0"
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

std::string format_report(const ExperimentReport& report, ReportFormat format) {
  std::string out;
  if (format == ReportFormat::csv) {
    out = std::string(kReportColumns) + "\n";
    for (const auto& row : report.rows) {
      check_label(row.axis, "axis");
      check_label(row.estimator, "estimator");
      out += row.axis + "," + format_number(row.axis_value) + "," + row.estimator + "," + format_number(row.mse) +
             "," + format_number(row.squared_bias) + "," + format_number(row.variance) + "," +
             format_number(row.error_rate) + "," + format_number(row.mean_estimate) + "," +
             format_number(row.true_value) + "," + std::to_string(row.n_reps) + "," + format_number(row.se_mse) +
             "\n";
    }
    return out;
  }
  out = "{\"rows\": [";
  for (std::size_t k = 0; k < report.rows.size(); ++k) {
    const auto& row = report.rows[k];
    out += k == 0 ? "\n" : ",\n";
    out += "  {\"axis\": " + json(row.axis).dump() + ", \"axis_value\": " + json_number(row.axis_value) +
           ", \"estimator\": " + json(row.estimator).dump() + ", \"mse\": " + json_number(row.mse) +
           ", \"squared_bias\": " + json_number(row.squared_bias) + ", \"variance\": " + json_number(row.variance) +
           ", \"error_rate\": " + json_number(row.error_rate) + ", \"mean_estimate\": " +
           json_number(row.mean_estimate) + ", \"true_value\": " + json_number(row.true_value) +
           ", \"n_reps\": " + std::to_string(row.n_reps) + ", \"se_mse\": " + json_number(row.se_mse) + "}";
  }
  out += report.rows.empty() ? "]}\n" : "\n]}\n";
  return out;
}

ExperimentReport parse_report(std::string_view text, ReportFormat format) {
  ExperimentReport report;
  if (format == ReportFormat::csv) {
    std::istringstream in{std::string(text)};
    std::string line;
    if (!std::getline(in, line) || line != kReportColumns) {
      throw ValidationError("report header does not match " + std::string(kReportColumns));
    }
    std::size_t number = 1;
    while (std::getline(in, line)) {
      ++number;
      if (line.empty()) continue;
      const auto f = split_csv(line);
      if (f.size() != 11) {
        throw ValidationError("line " + std::to_string(number) + ": expected 11 columns, found " +
                              std::to_string(f.size()));
      }
      report.rows.push_back(ReportRow{f[0], parse_double(f[1], number), f[2], parse_double(f[3], number),
                                      parse_double(f[4], number), parse_double(f[5], number),
                                      parse_double(f[6], number), parse_double(f[7], number),
                                      parse_double(f[8], number), parse_count(f[9], number),
                                      parse_double(f[10], number)});
    }
    return report;
  }
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    throw ValidationError(std::string("report is not valid JSON: ") + e.what());
  }
  try {
    for (const auto& row : doc.at("rows")) {
      report.rows.push_back(ReportRow{row.at("axis").get<std::string>(), json_double(row, "axis_value"),
                                      row.at("estimator").get<std::string>(), json_double(row, "mse"),
                                      json_double(row, "squared_bias"), json_double(row, "variance"),
                                      json_double(row, "error_rate"), json_double(row, "mean_estimate"),
                                      json_double(row, "true_value"), row.at("n_reps").get<std::int64_t>(),
                                      json_double(row, "se_mse")});
    }
  } catch (const json::exception& e) {
    throw ValidationError(std::string("malformed report: ") + e.what());
  }
  return report;
}

void write_text_file(const std::filesystem::path& path, std::string_view text) {
  std::error_code ec;
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path(), ec);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ConfigError("cannot write " + path.string());
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) throw ConfigError("failed writing " + path.string());
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void export_report(const ExperimentReport& report, const std::filesystem::path& path, ReportFormat format) {
  write_text_file(path, format_report(report, format));
}

ExperimentReport read_report(const std::filesystem::path& path, ReportFormat format) {
  return parse_report(read_text_file(path), format);
}

}  // namespace matchope::harness
