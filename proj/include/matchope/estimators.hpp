#pragma once

#include "matchope/core.hpp"

#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace matchope {

enum class EstimatorId { dm, ips, dr, dips, dpr, switch_dr, extended_switch_dr, mips, extended_mips };

inline constexpr EstimatorId kAllEstimators[] = {
    EstimatorId::dm,        EstimatorId::ips,           EstimatorId::dr,
    EstimatorId::dips,      EstimatorId::dpr,           EstimatorId::switch_dr,
    EstimatorId::extended_switch_dr, EstimatorId::mips, EstimatorId::extended_mips,
};

/// Display names: DM, IPS, DR, DiPS, DPR, SwitchDR, ExtSwitchDR, MIPS, ExtMIPS.
std::string to_string(EstimatorId id);
/// Case-insensitive; accepts the display names and the snake_case enum names.
EstimatorId parse_estimator(std::string_view text);

/// Where importance-weight denominators come from.
enum class PropensitySource { logged, estimated };

std::string to_string(PropensitySource source);
PropensitySource parse_propensity_source(std::string_view text);

/// Seeker-to-cluster assignment used by the marginalized estimators.
class EmbeddingMap {
 public:
  EmbeddingMap(std::vector<Index> assignment, Index n_clusters);

  static EmbeddingMap singletons(Index n_seekers);
  static EmbeddingMap single_cluster(Index n_seekers);

  const std::vector<Index>& assignment() const { return assignment_; }
  Index cluster(Index j) const { return assignment_[static_cast<std::size_t>(j)]; }
  Index n_clusters() const { return n_clusters_; }
  Index n_seekers() const { return static_cast<Index>(assignment_.size()); }

  /// Row c, column e: sum of probs(c, j) over the seekers of cluster e.
  Matrix marginalize(const Matrix& probs) const;

 private:
  std::vector<Index> assignment_;
  Index n_clusters_;
};

/// Default cluster count, ceil(|J| / 10).
Index default_cluster_count(Index n_seekers);

/// Quantile buckets of the seekers' projections on the leading principal
/// direction of the seeker contexts. Ties are broken by seeker index.
EmbeddingMap make_embedding_map(const ContextSet& contexts, Index n_clusters);

struct EstimatorDiagnostics {
  /// Records whose action lies outside both the target and the logging support.
  Index zero_support_records = 0;
};

struct EstimatorInput {
  EstimatorInput(const LoggedDataset& dataset, const Policy& target, const RewardModel& model,
                 PropensitySource source = PropensitySource::logged, const Policy* logging_policy = nullptr)
      : dataset(&dataset), target(&target), model(&model), source(source), logging_policy(logging_policy) {}

  const LoggedDataset* dataset;
  const Policy* target;
  const RewardModel* model;
  PropensitySource source;
  /// Full logging-policy rows; needed by the marginalized estimators when
  /// source is logged.
  const Policy* logging_policy;
  EstimatorDiagnostics* diagnostics = nullptr;
};

inline constexpr double kDefaultSwitchLambda = 10.0;

struct EstimatorOptions {
  double switch_lambda = kDefaultSwitchLambda;
  /// Required by MIPS and ExtMIPS.
  const EmbeddingMap* embedding = nullptr;
};

double estimate_dm(const EstimatorInput& input);
double estimate_ips(const EstimatorInput& input);
double estimate_dr(const EstimatorInput& input);
double estimate_dips(const EstimatorInput& input);
double estimate_dpr(const EstimatorInput& input);
double estimate_switch_dr(const EstimatorInput& input, double lambda);
double estimate_extended_switch_dr(const EstimatorInput& input, double lambda);
double estimate_mips(const EstimatorInput& input, const EmbeddingMap& embedding);
double estimate_extended_mips(const EstimatorInput& input, const EmbeddingMap& embedding);

double estimate(EstimatorId id, const EstimatorInput& input, const EstimatorOptions& options = {});

/// Several estimates on one input; shared pieces are computed once.
std::vector<double> estimate_many(std::span<const EstimatorId> ids, const EstimatorInput& input,
                                  const EstimatorOptions& options = {});

/// Weight at each logged record under the input's propensity source.
Vector estimator_weights(const EstimatorInput& input);

}  // namespace matchope
