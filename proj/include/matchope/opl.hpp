#pragma once

#include "matchope/core.hpp"
#include "matchope/estimators.hpp"
#include "matchope/features.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace matchope {

/// Linear-softmax policy over pair features:
/// pi_theta(j|c) proportional to exp(theta' f(c, j)).
struct SoftmaxPolicyParams {
  Vector theta;
  FeatureMode feature_mode = FeatureMode::concat_plus_product;

  /// theta = 0 (uniform policy) for the given context dimension.
  static SoftmaxPolicyParams zeros(Index dim, FeatureMode mode);
};

enum class GradientEstimator { dm_pg, ips_pg, dr_pg, dips_pg, dpr_pg };

std::string to_string(GradientEstimator kind);
GradientEstimator parse_gradient_estimator(std::string_view text);
/// Value estimator whose gradient `kind` estimates.
EstimatorId value_estimator(GradientEstimator kind);

struct LearnConfig {
  double learning_rate = 0.05;
  int n_iterations = 200;
  GradientEstimator gradient_estimator = GradientEstimator::dips_pg;
  std::uint64_t seed = 0;
  /// Caps w_theta inside the gradient terms when set.
  std::optional<double> weight_clip;
  FeatureMode feature_mode = FeatureMode::concat_plus_product;
  PropensitySource propensity_source = PropensitySource::logged;

  void validate() const;
};

Policy policy_probs(const SoftmaxPolicyParams& params, const ContextSet& contexts);

/// grad_theta log pi_theta(j|c) = f(c, j) - sum_j' pi_theta(j'|c) f(c, j').
Vector score_function(const SoftmaxPolicyParams& params, const ContextSet& contexts, Index c, Index j);

struct GradientOptions {
  PropensitySource source = PropensitySource::logged;
  std::optional<double> weight_clip;
};

Vector grad_dips_pg(const LoggedDataset& dataset, const SoftmaxPolicyParams& params, const RewardModel& model,
                    const ContextSet& contexts, const GradientOptions& options = {});
Vector grad_dpr_pg(const LoggedDataset& dataset, const SoftmaxPolicyParams& params, const RewardModel& model,
                   const ContextSet& contexts, const GradientOptions& options = {});
/// kind is one of dm_pg, ips_pg, dr_pg.
Vector grad_baseline_pg(const LoggedDataset& dataset, const SoftmaxPolicyParams& params, const RewardModel& model,
                        const ContextSet& contexts, GradientEstimator kind, const GradientOptions& options = {});

Vector policy_gradient(GradientEstimator kind, const LoggedDataset& dataset, const SoftmaxPolicyParams& params,
                       const RewardModel& model, const ContextSet& contexts, const GradientOptions& options = {});

struct LearnResult {
  SoftmaxPolicyParams params;
  /// Companion value estimate at theta_0, ..., theta_T (T + 1 entries).
  std::vector<double> estimated_values;
  /// True values at the same iterates; empty without a ground-truth environment.
  std::vector<double> true_values;
};

/// Gradient ascent from theta_0 = 0: theta_{t+1} = theta_t + eta * g(theta_t).
LearnResult learn_policy(const LoggedDataset& dataset, const ContextSet& contexts, const RewardModel& model,
                         const LearnConfig& cfg, const Environment* env = nullptr);

}  // namespace matchope
