#pragma once

#include "matchope/harness/opl_experiment.hpp"
#include "matchope/harness/sweep.hpp"
#include "matchope/harness/verify.hpp"

#include <filesystem>
#include <string_view>

namespace matchope::harness {

/// Everything a config file can set. Sections (all optional):
///   env   -> SyntheticEnvSpec, shared by sweep and learn
///   fit   -> FitConfig, shared by sweep and learn
///   sweep -> SweepConfig (axis, axis_values, n_replications, estimators, ...)
///   learn -> OplExperimentConfig and LearnConfig fields
///   check -> VerificationConfig
/// Unknown keys are errors.
struct ExperimentConfig {
  SweepConfig sweep;
  OplExperimentConfig learn;
  VerificationConfig check;
};

ExperimentConfig parse_config(std::string_view json_text);
ExperimentConfig load_config(const std::filesystem::path& path);

}  // namespace matchope::harness
