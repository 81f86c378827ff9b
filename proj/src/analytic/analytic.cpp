#include "matchope/analytic.hpp"

#include "matchope/errors.hpp"
#include "matchope/numeric.hpp"
#include "matchope/parallel.hpp"
#include "matchope/random.hpp"
#include "matchope/synth.hpp"

#include <cmath>
#include <sstream>

namespace matchope {
namespace {

std::string pair_name(Index c, Index j);

void check_policies(const Environment& env, const Policy& pi, const Policy& pi0) {
  require_same_shape(pi, env.n_companies(), env.n_seekers(), "target policy");
  require_same_shape(pi0, env.n_companies(), env.n_seekers(), "logging policy");
  for (Index c = 0; c < env.n_companies(); ++c) {
    for (Index j = 0; j < env.n_seekers(); ++j) {
      if (pi(c, j) > 0.0 && !(pi0(c, j) > 0.0)) {
        throw PreconditionError("common support violated at " + pair_name(c, j));
      }
    }
  }
}

const Matrix& need(const std::optional<Matrix>& field, const char* name) {
  if (!field) throw ConfigError(std::string("reward model is missing ") + name);
  return *field;
}

std::string pair_name(Index c, Index j) {
  std::ostringstream out;
  out << "(c=" << c << ", j=" << j << ")";
  return out.str();
}

// pi / pi0 on the logging support; throws where pi leaves it.
double weight(const Policy& pi, const Policy& pi0, Index c, Index j) {
  if (pi0(c, j) > 0.0) return pi(c, j) / pi0(c, j);
  if (pi(c, j) > 0.0) throw PreconditionError("common support violated at " + pair_name(c, j));
  return 0.0;
}

// Per-company statistic whose conditional mean given the logged action j is
// mean(c, j) and whose conditional variance is noise(c, j). Returns the
// variance of the average over companies, split into its two parts.
template <typename Mean, typename Noise>
AnalyticReport weighted_variance(EstimatorId id, const Environment& env, const Policy& pi0, Mean mean, Noise noise) {
  CompensatedSum noise_total;
  CompensatedSum spread_total;
  for (Index c = 0; c < env.n_companies(); ++c) {
    CompensatedSum center;
    CompensatedSum row_noise;
    for (Index j = 0; j < env.n_seekers(); ++j) {
      if (!(pi0(c, j) > 0.0)) continue;
      center.add(pi0(c, j) * mean(c, j));
      row_noise.add(pi0(c, j) * noise(c, j));
    }
    const double mu = center.value();
    CompensatedSum spread;
    for (Index j = 0; j < env.n_seekers(); ++j) {
      if (!(pi0(c, j) > 0.0)) continue;
      const double d = mean(c, j) - mu;
      spread.add(pi0(c, j) * d * d);
    }
    noise_total.add(row_noise.value());
    spread_total.add(spread.value());
  }
  const double scale = static_cast<double>(env.n_companies()) * static_cast<double>(env.n_companies());
  AnalyticReport report;
  report.estimator = id;
  const double noise_part = noise_total.value() / scale;
  const double spread_part = spread_total.value() / scale;
  report.variance = noise_part + spread_part;
  report.components = {{"reward_noise", noise_part}, {"policy_variance", spread_part}};
  return report;
}

void finish(AnalyticReport& report, double bias) {
  report.bias = bias;
  report.mse = bias * bias + report.variance;
}

template <typename Term>
double company_average(const Environment& env, Term term) {
  CompensatedSum total;
  for (Index c = 0; c < env.n_companies(); ++c) {
    CompensatedSum row;
    for (Index j = 0; j < env.n_seekers(); ++j) row.add(term(c, j));
    total.add(row.value());
  }
  return total.value() / static_cast<double>(env.n_companies());
}

double estimated_ratio(const Policy& pi, const Policy& pi0, const Matrix& pi0_hat, Index c, Index j) {
  if (!(pi(c, j) > 0.0)) return 0.0;
  if (!(pi0_hat(c, j) > 0.0)) throw PreconditionError("pi0_hat is zero where pi is positive at " + pair_name(c, j));
  return pi0(c, j) * pi(c, j) / pi0_hat(c, j);
}

void check_pi0_hat(const Environment& env, const Matrix& pi0_hat) {
  if (pi0_hat.rows() != env.n_companies() || pi0_hat.cols() != env.n_seekers()) {
    throw ShapeError("pi0_hat does not match the environment");
  }
}

Matrix rows_of(const Matrix& m, Index c) { return m.row(c); }

RewardModel model_row(const RewardModel& model, Index c) {
  RewardModel out;
  if (model.q_hat_r) out.q_hat_r = rows_of(*model.q_hat_r, c);
  if (model.q_hat_m) out.q_hat_m = rows_of(*model.q_hat_m, c);
  if (model.q_hat_s) out.q_hat_s = rows_of(*model.q_hat_s, c);
  if (model.pi0_hat) out.pi0_hat = Policy(rows_of(model.pi0_hat->probs(), c), model.pi0_hat->label());
  return out;
}

}  // namespace

AnalyticReport variance_ips(const Environment& env, const Policy& pi, const Policy& pi0) {
  check_policies(env, pi, pi0);
  auto report = weighted_variance(
      EstimatorId::ips, env, pi0, [&](Index c, Index j) { return weight(pi, pi0, c, j) * env.q_m()(c, j); },
      [&](Index c, Index j) {
        const double w = weight(pi, pi0, c, j);
        return w * w * env.sigma2_m(c, j);
      });
  finish(report, 0.0);
  return report;
}

AnalyticReport variance_dr(const Environment& env, const Policy& pi, const Policy& pi0, const RewardModel& model) {
  check_policies(env, pi, pi0);
  model.validate(env.n_companies(), env.n_seekers());
  const Matrix& q_hat_m = need(model.q_hat_m, "q_hat_m");
  auto report = weighted_variance(
      EstimatorId::dr, env, pi0,
      [&](Index c, Index j) { return weight(pi, pi0, c, j) * (env.q_m()(c, j) - q_hat_m(c, j)); },
      [&](Index c, Index j) {
        const double w = weight(pi, pi0, c, j);
        return w * w * env.sigma2_m(c, j);
      });
  finish(report, 0.0);
  return report;
}

AnalyticReport variance_dips(const Environment& env, const Policy& pi, const Policy& pi0, const RewardModel& model) {
  check_policies(env, pi, pi0);
  model.validate(env.n_companies(), env.n_seekers());
  const Matrix& q_hat_r = need(model.q_hat_r, "q_hat_r");
  auto report = weighted_variance(
      EstimatorId::dips, env, pi0,
      [&](Index c, Index j) { return weight(pi, pi0, c, j) * env.q_s()(c, j) * q_hat_r(c, j); },
      [&](Index c, Index j) {
        const double wq = weight(pi, pi0, c, j) * q_hat_r(c, j);
        return wq * wq * env.sigma2_s(c, j);
      });
  finish(report, bias_dips(env, pi, model));
  return report;
}

AnalyticReport variance_dpr(const Environment& env, const Policy& pi, const Policy& pi0, const RewardModel& model) {
  check_policies(env, pi, pi0);
  model.validate(env.n_companies(), env.n_seekers());
  const Matrix& q_hat_r = need(model.q_hat_r, "q_hat_r");
  const Matrix& q_hat_m = need(model.q_hat_m, "q_hat_m");
  auto report = weighted_variance(
      EstimatorId::dpr, env, pi0,
      [&](Index c, Index j) {
        return weight(pi, pi0, c, j) * (env.q_s()(c, j) * q_hat_r(c, j) - q_hat_m(c, j));
      },
      [&](Index c, Index j) {
        const double wq = weight(pi, pi0, c, j) * q_hat_r(c, j);
        return wq * wq * env.sigma2_s(c, j);
      });
  finish(report, bias_dips(env, pi, model));
  return report;
}

double bias_dips(const Environment& env, const Policy& pi, const RewardModel& model) {
  require_same_shape(pi, env.n_companies(), env.n_seekers(), "target policy");
  model.validate(env.n_companies(), env.n_seekers());
  const Matrix& q_hat_r = need(model.q_hat_r, "q_hat_r");
  return company_average(env, [&](Index c, Index j) {
    return pi(c, j) * env.q_s()(c, j) * (q_hat_r(c, j) - env.q_r()(c, j));
  });
}

double variance_reduction_bound(const Environment& env, const Policy& pi, const Policy& pi0,
                                const RewardModel& model) {
  check_policies(env, pi, pi0);
  model.validate(env.n_companies(), env.n_seekers());
  const Matrix& q_hat_r = need(model.q_hat_r, "q_hat_r");
  for (Index c = 0; c < env.n_companies(); ++c) {
    for (Index j = 0; j < env.n_seekers(); ++j) {
      if (q_hat_r(c, j) > env.q_r()(c, j)) {
        throw PreconditionError("q_hat_r overestimates q_r at " + pair_name(c, j));
      }
    }
  }
  CompensatedSum total;
  for (Index c = 0; c < env.n_companies(); ++c) {
    CompensatedSum row;
    for (Index j = 0; j < env.n_seekers(); ++j) {
      if (!(pi0(c, j) > 0.0)) continue;
      const double w = weight(pi, pi0, c, j);
      row.add(pi0(c, j) * w * w * env.q_s()(c, j) * env.sigma2_r(c, j));
    }
    total.add(row.value());
  }
  return total.value() / (static_cast<double>(env.n_companies()) * static_cast<double>(env.n_companies()));
}

VarianceReductionCheck check_variance_reduction(const Environment& env, const Policy& pi, const Policy& pi0,
                                                const RewardModel& model) {
  VarianceReductionCheck out;
  out.bound = variance_reduction_bound(env, pi, pi0, model);
  out.variance_ips = variance_ips(env, pi, pi0).variance;
  out.variance_dips = variance_dips(env, pi, pi0, model).variance;
  out.slack = out.variance_ips - out.variance_dips - out.bound;
  out.holds = out.variance_ips - out.variance_dips >= out.bound && out.bound >= 0.0;
  return out;
}

double bias_ips_estimated_pi0(const Environment& env, const Policy& pi, const Policy& pi0, const Matrix& pi0_hat) {
  check_policies(env, pi, pi0);
  check_pi0_hat(env, pi0_hat);
  return company_average(env, [&](Index c, Index j) {
    return (estimated_ratio(pi, pi0, pi0_hat, c, j) - pi(c, j)) * env.q_m()(c, j);
  });
}

double bias_dips_estimated_pi0(const Environment& env, const Policy& pi, const Policy& pi0, const Matrix& pi0_hat,
                               const RewardModel& model) {
  check_policies(env, pi, pi0);
  check_pi0_hat(env, pi0_hat);
  model.validate(env.n_companies(), env.n_seekers());
  const Matrix& q_hat_r = need(model.q_hat_r, "q_hat_r");
  return company_average(env, [&](Index c, Index j) {
    return estimated_ratio(pi, pi0, pi0_hat, c, j) * env.q_s()(c, j) * q_hat_r(c, j) - pi(c, j) * env.q_m()(c, j);
  });
}

double bias_dpr_estimated_pi0(const Environment& env, const Policy& pi, const Policy& pi0, const Matrix& pi0_hat,
                              const RewardModel& model) {
  check_policies(env, pi, pi0);
  check_pi0_hat(env, pi0_hat);
  model.validate(env.n_companies(), env.n_seekers());
  const Matrix& q_hat_r = need(model.q_hat_r, "q_hat_r");
  const Matrix& q_hat_m = need(model.q_hat_m, "q_hat_m");
  return company_average(env, [&](Index c, Index j) {
    const double ratio = estimated_ratio(pi, pi0, pi0_hat, c, j);
    return ratio * (env.q_s()(c, j) * q_hat_r(c, j) - q_hat_m(c, j)) + pi(c, j) * (q_hat_m(c, j) - env.q_m()(c, j));
  });
}

AnalyticReport analytic_report(EstimatorId id, const Environment& env, const Policy& pi, const Policy& pi0,
                               const RewardModel& model) {
  switch (id) {
    case EstimatorId::ips:
      return variance_ips(env, pi, pi0);
    case EstimatorId::dr:
      return variance_dr(env, pi, pi0, model);
    case EstimatorId::dips:
      return variance_dips(env, pi, pi0, model);
    case EstimatorId::dpr:
      return variance_dpr(env, pi, pi0, model);
    default:
      throw ConfigError("no closed form for " + to_string(id) + "; use exact_moments");
  }
}

ExactMoments exact_moments(const Environment& env, const Policy& pi, const Policy& pi0, const RewardModel& model,
                           EstimatorId id, PropensitySource source, const EstimatorOptions& options) {
  check_policies(env, pi, pi0);
  model.validate(env.n_companies(), env.n_seekers());
  const Index n_j = env.n_seekers();
  CompensatedSum mean_total;
  CompensatedSum var_total;
  for (Index c = 0; c < env.n_companies(); ++c) {
    const Policy pi_row(rows_of(pi.probs(), c), pi.label());
    const Policy pi0_row(rows_of(pi0.probs(), c), pi0.label());
    const RewardModel row_model = model_row(model, c);

    std::vector<double> probs;
    std::vector<double> terms;
    for (Index j = 0; j < n_j; ++j) {
      if (!(pi0(c, j) > 0.0)) continue;
      const double qs = env.q_s()(c, j);
      const double qr = env.q_r()(c, j);
      const struct {
        int s, r;
        double p;
      } outcomes[] = {{0, 0, 1.0 - qs}, {1, 0, qs * (1.0 - qr)}, {1, 1, qs * qr}};
      for (const auto& o : outcomes) {
        if (!(o.p > 0.0)) continue;
        const LoggedDataset data({LoggedRecord{j, o.s, o.r, o.s * o.r, pi0(c, j)}}, n_j);
        EstimatorInput input(data, pi_row, row_model, source, &pi0_row);
        probs.push_back(pi0(c, j) * o.p);
        terms.push_back(estimate(id, input, options));
      }
    }
    CompensatedSum mu;
    for (std::size_t k = 0; k < terms.size(); ++k) mu.add(probs[k] * terms[k]);
    CompensatedSum var;
    for (std::size_t k = 0; k < terms.size(); ++k) {
      const double d = terms[k] - mu.value();
      var.add(probs[k] * d * d);
    }
    mean_total.add(mu.value());
    var_total.add(var.value());
  }
  const double n = static_cast<double>(env.n_companies());
  ExactMoments out;
  out.mean = mean_total.value() / n;
  out.bias = out.mean - true_policy_value(env, pi);
  out.variance = var_total.value() / (n * n);
  out.mse = out.bias * out.bias + out.variance;
  return out;
}

Matrix monte_carlo_estimates(const Environment& env, const Policy& pi, const Policy& pi0, const RewardModel& model,
                             std::span<const EstimatorId> ids, const MonteCarloConfig& cfg) {
  check_policies(env, pi, pi0);
  if (cfg.n_reps < 1) throw ConfigError("n_reps must be at least 1");
  Matrix out(cfg.n_reps, static_cast<Index>(ids.size()));
  parallel_for(static_cast<std::size_t>(cfg.n_reps), cfg.jobs, [&](std::size_t k) {
    const LoggedDataset data = sample_logged_data(env, pi0, derive_seed(cfg.seed, k));
    EstimatorInput input(data, pi, model, cfg.source, &pi0);
    const auto values = estimate_many(ids, input, cfg.options);
    for (std::size_t e = 0; e < values.size(); ++e) out(static_cast<Index>(k), static_cast<Index>(e)) = values[e];
  });
  return out;
}

MonteCarloProfile summarize_estimates(std::span<const double> estimates, double true_value, EstimatorId id) {
  if (estimates.empty()) throw ConfigError("no estimates to summarize");
  const double n = static_cast<double>(estimates.size());
  MonteCarloProfile out;
  out.estimator = id;
  out.n_reps = static_cast<std::int64_t>(estimates.size());
  out.true_value = true_value;
  // Shifting by the first estimate makes a constant column come out exact.
  const double shift = estimates.front();
  CompensatedSum shifted;
  for (double x : estimates) shifted.add(x - shift);
  out.mean = shift + shifted.value() / n;
  out.bias = out.mean - true_value;
  out.mse = out.bias * out.bias;
  if (estimates.size() < 2) return out;

  CompensatedSum centered;
  for (double x : estimates) centered.add((x - out.mean) * (x - out.mean));
  const double variance = centered.value() / n;
  out.variance = variance;
  out.mse += variance;
  out.se_mean = std::sqrt(centered.value() / (n - 1.0) / n);

  CompensatedSum sq_mean;
  for (double x : estimates) sq_mean.add((x - true_value) * (x - true_value));
  const double m2 = sq_mean.value() / n;
  CompensatedSum sq_spread;
  for (double x : estimates) {
    const double d = (x - true_value) * (x - true_value) - m2;
    sq_spread.add(d * d);
  }
  out.se_mse = std::sqrt(sq_spread.value() / (n - 1.0) / n);
  return out;
}

MonteCarloProfile monte_carlo_profile(const Environment& env, const Policy& pi, const Policy& pi0,
                                      const RewardModel& model, EstimatorId id, const MonteCarloConfig& cfg) {
  const EstimatorId ids[] = {id};
  const Matrix estimates = monte_carlo_estimates(env, pi, pi0, model, ids, cfg);
  const Vector column = estimates.col(0);
  return summarize_estimates(std::span<const double>(column.data(), static_cast<std::size_t>(column.size())),
                             true_policy_value(env, pi), id);
}

}  // namespace matchope
