#pragma once

#include "matchope/estimators.hpp"
#include "matchope/harness/report.hpp"
#include "matchope/models.hpp"
#include "matchope/synth.hpp"

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace matchope::harness {

enum class SweepAxis { n_companies, n_seekers, sparsity };

std::string to_string(SweepAxis axis);
SweepAxis parse_sweep_axis(std::string_view text);

/// n_companies: 250..4000, n_seekers: 25..400 (doubling), sparsity: theta_sp 0..4.
std::vector<double> default_axis_values(SweepAxis axis);

enum class ModelSource { oracle, fitted };

std::string to_string(ModelSource source);
ModelSource parse_model_source(std::string_view text);

struct SweepConfig {
  SweepAxis axis = SweepAxis::n_companies;
  std::vector<double> axis_values = default_axis_values(SweepAxis::n_companies);
  std::int64_t n_replications = 200;
  std::vector<EstimatorId> estimators{std::begin(kAllEstimators), std::end(kAllEstimators)};
  SyntheticEnvSpec base;
  FitConfig fit;
  ModelSource model_source = ModelSource::fitted;
  PropensitySource propensity_source = PropensitySource::logged;
  std::uint64_t master_seed = 0;
  double switch_lambda = kDefaultSwitchLambda;
  /// Clusters for MIPS / ExtMIPS; 0 means default_cluster_count(|J|).
  Index n_clusters = 0;
  /// Worker threads. Results do not depend on it.
  unsigned jobs = 1;

  void validate() const;
};

/// Environment spec used at axis position `axis_index`.
SyntheticEnvSpec axis_environment(const SweepConfig& cfg, std::size_t axis_index);

/// Seed of replication `rep` at axis position `axis_index`.
std::uint64_t replication_seed(std::uint64_t master_seed, std::size_t axis_index, std::int64_t rep);

/// Fraction of replications whose estimated ordering of pi against pi0
/// disagrees with the true ordering. A true tie counts as pi >= pi0.
double error_rate(std::span<const double> estimates_pi, std::span<const double> estimates_pi0, double true_pi,
                  double true_pi0);

/// Aborts with NumericalError when more than 1% of an axis value's
/// replications fail; failed replications are otherwise dropped and counted.
ExperimentReport run_sweep(const SweepConfig& cfg);

}  // namespace matchope::harness
