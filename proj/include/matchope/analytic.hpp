#pragma once

#include "matchope/core.hpp"
#include "matchope/estimators.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace matchope {

struct AnalyticComponent {
  std::string label;
  double value = 0.0;
};

/// Closed-form sampling moments of one estimator. Variances are taken over
/// datasets drawn from the logging policy; mse = bias^2 + variance.
struct AnalyticReport {
  EstimatorId estimator = EstimatorId::ips;
  double bias = 0.0;
  double variance = 0.0;
  double mse = 0.0;
  /// "reward_noise": weighted outcome noise; "policy_variance": spread of the
  /// weighted conditional mean over the logging policy's actions.
  std::vector<AnalyticComponent> components;
};

AnalyticReport variance_ips(const Environment& env, const Policy& pi, const Policy& pi0);
AnalyticReport variance_dr(const Environment& env, const Policy& pi, const Policy& pi0, const RewardModel& model);
AnalyticReport variance_dips(const Environment& env, const Policy& pi, const Policy& pi0, const RewardModel& model);
/// Exact for any q_hat_m; the q_hat_m term drops out when q_hat_m = q_m.
AnalyticReport variance_dpr(const Environment& env, const Policy& pi, const Policy& pi0, const RewardModel& model);

/// (1/|C|) sum_c E_pi[q_s (q_hat_r - q_r)]. Shared by DiPS and DPR.
double bias_dips(const Environment& env, const Policy& pi, const RewardModel& model);

/// (1/|C|^2) sum_c E_pi0[w^2 q_s sigma_r^2]. Requires q_hat_r <= q_r
/// everywhere; throws PreconditionError naming the first offending pair.
double variance_reduction_bound(const Environment& env, const Policy& pi, const Policy& pi0,
                                const RewardModel& model);

struct VarianceReductionCheck {
  double variance_ips = 0.0;
  double variance_dips = 0.0;
  double bound = 0.0;
  /// variance_ips - variance_dips - bound.
  double slack = 0.0;
  bool holds = false;
};

/// Evaluates variance_ips - variance_dips >= bound >= 0 without throwing on failure.
VarianceReductionCheck check_variance_reduction(const Environment& env, const Policy& pi, const Policy& pi0,
                                                const RewardModel& model);

/// Biases when weights use `pi0_hat` in place of the true logging policy.
/// `pi0_hat` is a raw propensity matrix; its rows need not sum to one.
double bias_ips_estimated_pi0(const Environment& env, const Policy& pi, const Policy& pi0, const Matrix& pi0_hat);
double bias_dips_estimated_pi0(const Environment& env, const Policy& pi, const Policy& pi0, const Matrix& pi0_hat,
                               const RewardModel& model);
double bias_dpr_estimated_pi0(const Environment& env, const Policy& pi, const Policy& pi0, const Matrix& pi0_hat,
                              const RewardModel& model);

/// Closed-form report for IPS, DR, DiPS or DPR under logged propensities.
AnalyticReport analytic_report(EstimatorId id, const Environment& env, const Policy& pi, const Policy& pi0,
                               const RewardModel& model);

struct ExactMoments {
  double mean = 0.0;
  double bias = 0.0;
  double variance = 0.0;
  double mse = 0.0;
};

/// Exact moments of any estimator by enumerating every (j, s, r) outcome of
/// every company. Each company's contribution is evaluated by running the
/// estimator on a one-company instance, so the result reflects the estimator
/// code rather than a formula.
ExactMoments exact_moments(const Environment& env, const Policy& pi, const Policy& pi0, const RewardModel& model,
                           EstimatorId id, PropensitySource source = PropensitySource::logged,
                           const EstimatorOptions& options = {});

struct MonteCarloConfig {
  std::int64_t n_reps = 1000;
  std::uint64_t seed = 0;
  unsigned jobs = 1;
  PropensitySource source = PropensitySource::logged;
  EstimatorOptions options;
};

/// Estimates of each listed estimator on n_reps independent datasets drawn
/// from pi0 (row = replication, column = estimator). Replication k uses seed
/// derive_seed(cfg.seed, k) whatever the thread count.
Matrix monte_carlo_estimates(const Environment& env, const Policy& pi, const Policy& pi0, const RewardModel& model,
                             std::span<const EstimatorId> ids, const MonteCarloConfig& cfg);

struct MonteCarloProfile {
  EstimatorId estimator = EstimatorId::ips;
  std::int64_t n_reps = 0;
  double true_value = 0.0;
  double mean = 0.0;
  double bias = 0.0;
  /// 1/n second central moment; absent when n_reps = 1.
  std::optional<double> variance;
  double mse = 0.0;
  /// Standard error of the mean (and therefore of the bias).
  double se_mean = 0.0;
  double se_mse = 0.0;
};

/// Empirical moments of one column of estimates around `true_value`.
MonteCarloProfile summarize_estimates(std::span<const double> estimates, double true_value, EstimatorId id);

MonteCarloProfile monte_carlo_profile(const Environment& env, const Policy& pi, const Policy& pi0,
                                      const RewardModel& model, EstimatorId id, const MonteCarloConfig& cfg);

}  // namespace matchope
