#pragma once

#include "matchope/harness/report.hpp"
#include "matchope/harness/sweep.hpp"
#include "matchope/opl.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace matchope::harness {

struct OplExperimentConfig {
  SyntheticEnvSpec env;
  FitConfig fit;
  /// Shared settings; gradient_estimator is replaced by each learner in turn.
  LearnConfig learn;
  std::vector<GradientEstimator> learners{GradientEstimator::dm_pg, GradientEstimator::ips_pg,
                                          GradientEstimator::dr_pg, GradientEstimator::dips_pg,
                                          GradientEstimator::dpr_pg};
  ModelSource model_source = ModelSource::fitted;
  std::int64_t n_seeds = 20;
  std::uint64_t master_seed = 0;
  unsigned jobs = 1;

  void validate() const;
};

/// One learned policy.
struct OplRun {
  std::string learner;
  std::int64_t seed_index = 0;
  double relative_value = 0.0;
  double final_estimate = 0.0;
  /// True value of every iterate divided by the logging policy's value.
  std::vector<double> relative_curve;

  friend bool operator==(const OplRun&, const OplRun&) = default;
};

struct OplSummary {
  std::string learner;
  std::int64_t n_seeds = 0;
  double mean_relative_value = 0.0;
  /// Standard error of the mean over seeds (0 with one seed).
  double se_relative_value = 0.0;

  friend bool operator==(const OplSummary&, const OplSummary&) = default;
};

struct OplReport {
  double logging_value = 0.0;
  std::vector<OplSummary> summaries;
  std::vector<OplRun> runs;
};

/// Learns one policy per (learner, seed) on a fixed environment; seed k draws
/// its own logged dataset. Values are reported relative to the logging policy.
OplReport run_opl_experiment(const OplExperimentConfig& cfg);

const OplSummary& find_summary(const OplReport& report, GradientEstimator learner);

/// CSV: learner,n_seeds,mean_relative_value,se_relative_value,logging_value.
/// JSON additionally lists every run.
std::string format_opl_report(const OplReport& report, ReportFormat format);
void export_opl_report(const OplReport& report, const std::filesystem::path& path, ReportFormat format);

}  // namespace matchope::harness
