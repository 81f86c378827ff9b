#include "matchope/harness/verify.hpp"

#include "matchope/analytic.hpp"
#include "matchope/errors.hpp"
#include "matchope/harness/report.hpp"
#include "matchope/numeric.hpp"
#include "matchope/random.hpp"
#include "matchope/synth.hpp"

#include <algorithm>
#include <cmath>

namespace matchope::harness {
namespace {

double clip01(double x) { return std::clamp(x, 0.0, 1.0); }

// Reward model with q_hat_r below q_r everywhere and a noisy q_hat_m.
RewardModel perturbed_model(const Environment& env, std::uint64_t seed) {
  Rng rng(seed);
  Matrix q_hat_r = env.q_r(), q_hat_m = env.q_m();
  for (Index c = 0; c < env.n_companies(); ++c) {
    for (Index j = 0; j < env.n_seekers(); ++j) {
      q_hat_r(c, j) = std::min(clip01(env.q_r()(c, j) + 0.1 * rng.normal()), env.q_r()(c, j));
      q_hat_m(c, j) = clip01(env.q_m()(c, j) + 0.05 * rng.normal());
    }
  }
  RewardModel model;
  model.q_hat_r = std::move(q_hat_r);
  model.q_hat_m = std::move(q_hat_m);
  return model;
}

std::string describe(const char* what, double got, double want, double tol) {
  return std::string(what) + " " + format_number(got) + " vs " + format_number(want) + " (tolerance " +
         format_number(tol) + ")";
}

}  // namespace

void VerificationConfig::validate() const {
  if (n_companies < 1) throw ConfigError("check.n_companies must be at least 1");
  if (n_seekers < 2) throw ConfigError("check.n_seekers must be at least 2");
  if (n_reps < 100) throw ConfigError("check.n_reps must be at least 100");
}

bool VerificationResult::passed() const {
  return std::all_of(checks.begin(), checks.end(), [](const VerificationCheck& c) { return c.passed; });
}

VerificationResult run_verification_suite(const VerificationConfig& cfg) {
  cfg.validate();
  SyntheticEnvSpec spec;
  spec.n_companies = static_cast<Index>(cfg.n_companies);
  spec.n_seekers = static_cast<Index>(cfg.n_seekers);
  spec.dim = 3;
  spec.theta_sp = 1.0;
  spec.seed = derive_seed(cfg.seed, 0);
  const Environment env = generate_environment(spec).env;
  const Policy pi0 = softmax_logging_policy(env, spec.beta);
  const Policy pi = epsilon_greedy_target_policy(env, spec.epsilon);
  const RewardModel model = perturbed_model(env, derive_seed(cfg.seed, 1));
  const double truth = true_policy_value(env, pi);

  VerificationResult result;
  const EstimatorId ids[] = {EstimatorId::ips, EstimatorId::dr, EstimatorId::dips, EstimatorId::dpr};

  for (EstimatorId id : ids) {
    const AnalyticReport a = analytic_report(id, env, pi, pi0, model);
    const ExactMoments e = exact_moments(env, pi, pi0, model, id);
    const double tol = 1e-10;
    VerificationCheck check{"analytic_vs_enumeration/" + to_string(id), false, ""};
    const bool bias_ok = std::abs(a.bias - e.bias) <= tol;
    const bool var_ok = std::abs(a.variance - e.variance) <= tol * std::max(1.0, e.variance);
    check.passed = bias_ok && var_ok;
    check.detail = describe("bias", a.bias, e.bias, tol) + "; " + describe("variance", a.variance, e.variance, tol);
    result.checks.push_back(std::move(check));
  }

  MonteCarloConfig mc;
  mc.n_reps = cfg.n_reps;
  mc.seed = derive_seed(cfg.seed, 2);
  mc.jobs = cfg.jobs;
  const Matrix estimates = monte_carlo_estimates(env, pi, pi0, model, ids, mc);
  for (Index k = 0; k < estimates.cols(); ++k) {
    const EstimatorId id = ids[k];
    const AnalyticReport a = analytic_report(id, env, pi, pi0, model);
    const Vector column = estimates.col(k);
    const std::span<const double> xs(column.data(), static_cast<std::size_t>(column.size()));
    const MonteCarloProfile p = summarize_estimates(xs, truth, id);
    const double n = static_cast<double>(xs.size());
    CompensatedSum spread;
    for (double x : xs) {
      const double d = (x - p.mean) * (x - p.mean) - *p.variance;
      spread.add(d * d);
    }
    const double se_var = std::sqrt(spread.value() / (n - 1.0) / n);
    const double bias_tol = 4.0 * p.se_mean, var_tol = 4.0 * se_var;
    VerificationCheck check{"analytic_vs_monte_carlo/" + to_string(id), false, ""};
    check.passed = std::abs(p.bias - a.bias) <= bias_tol && std::abs(*p.variance - a.variance) <= var_tol;
    check.detail = describe("bias", p.bias, a.bias, bias_tol) + "; " + describe("variance", *p.variance, a.variance, var_tol);
    result.checks.push_back(std::move(check));
  }

  const VarianceReductionCheck vr = check_variance_reduction(env, pi, pi0, model);
  result.checks.push_back({"variance_reduction_bound", vr.holds,
                           "Var(IPS) - Var(DiPS) = " + format_number(vr.variance_ips - vr.variance_dips) +
                               ", bound = " + format_number(vr.bound)});

  const LoggedDataset data = sample_logged_data(env, pi0, derive_seed(cfg.seed, 3));
  RewardModel zero_m = model;
  zero_m.q_hat_m = Matrix::Zero(env.n_companies(), env.n_seekers());
  const EstimatorInput input(data, pi, zero_m);
  const double ips = estimate_ips(input), dr = estimate_dr(input);
  const double dips = estimate_dips(input), dpr = estimate_dpr(input);
  result.checks.push_back({"collapse/dr_to_ips", dr == ips, describe("DR", dr, ips, 0.0)});
  result.checks.push_back({"collapse/dpr_to_dips", dpr == dips, describe("DPR", dpr, dips, 0.0)});
  return result;
}

}  // namespace matchope::harness
