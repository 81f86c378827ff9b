#include "matchope/harness/sweep.hpp"

#include "matchope/analytic.hpp"
#include "matchope/errors.hpp"
#include "matchope/parallel.hpp"
#include "matchope/random.hpp"

#include <algorithm>
#include <cmath>
#include <optional>

namespace matchope::harness {
namespace {

constexpr std::uint64_t kEnvStream = 0;
constexpr std::uint64_t kReplicationStream = 1;

bool needs_embedding(std::span<const EstimatorId> ids) {
  return std::any_of(ids.begin(), ids.end(),
                     [](EstimatorId id) { return id == EstimatorId::mips || id == EstimatorId::extended_mips; });
}

struct ReplicationResult {
  bool ok = false;
  std::string error;
  std::vector<double> estimates_pi;
  std::vector<double> estimates_pi0;
  std::int64_t fit_warnings = 0;
};

}  // namespace

std::string to_string(SweepAxis axis) {
  switch (axis) {
    case SweepAxis::n_companies:
      return "n_companies";
    case SweepAxis::n_seekers:
      return "n_seekers";
    case SweepAxis::sparsity:
      return "sparsity";
  }
  return "?";
}

SweepAxis parse_sweep_axis(std::string_view text) {
  for (auto axis : {SweepAxis::n_companies, SweepAxis::n_seekers, SweepAxis::sparsity}) {
    if (text == to_string(axis)) return axis;
  }
  throw ConfigError("unknown sweep axis '" + std::string(text) + "' (expected n_companies, n_seekers or sparsity)");
}

std::vector<double> default_axis_values(SweepAxis axis) {
  switch (axis) {
    case SweepAxis::n_companies:
      return {250, 500, 1000, 2000, 4000};
    case SweepAxis::n_seekers:
      return {25, 50, 100, 200, 400};
    case SweepAxis::sparsity:
      return {0, 1, 2, 3, 4};
  }
  return {};
}

std::string to_string(ModelSource source) { return source == ModelSource::oracle ? "oracle" : "fitted"; }

ModelSource parse_model_source(std::string_view text) {
  if (text == "oracle") return ModelSource::oracle;
  if (text == "fitted") return ModelSource::fitted;
  throw ConfigError("unknown model source '" + std::string(text) + "' (expected oracle or fitted)");
}

void SweepConfig::validate() const {
  if (axis_values.empty()) throw ConfigError("axis_values must not be empty");
  for (std::size_t k = 0; k < axis_values.size(); ++k) {
    const double v = axis_values[k];
    if (!std::isfinite(v)) throw ConfigError("axis_values must be finite");
    if (k > 0 && !(v > axis_values[k - 1])) throw ConfigError("axis_values must be strictly increasing");
    if (axis != SweepAxis::sparsity && (v != std::floor(v) || v < 1 || v > 1e9)) {
      throw ConfigError("axis_values for " + to_string(axis) + " must be positive integers");
    }
  }
  if (n_replications < 2) throw ConfigError("n_replications must be at least 2");
  if (estimators.empty()) throw ConfigError("estimators must not be empty");
  for (std::size_t a = 0; a < estimators.size(); ++a) {
    for (std::size_t b = a + 1; b < estimators.size(); ++b) {
      if (estimators[a] == estimators[b]) throw ConfigError("estimator " + to_string(estimators[a]) + " listed twice");
    }
  }
  if (!(switch_lambda >= 0.0)) throw ConfigError("switch_lambda must be non-negative");
  if (n_clusters < 0) throw ConfigError("n_clusters must be non-negative");
  for (std::size_t k = 0; k < axis_values.size(); ++k) {
    const SyntheticEnvSpec spec = axis_environment(*this, k);
    spec.validate();
    if (n_clusters > spec.n_seekers) throw ConfigError("n_clusters exceeds the number of seekers");
  }
  if (model_source == ModelSource::fitted || propensity_source == PropensitySource::estimated) fit.validate();
}

SyntheticEnvSpec axis_environment(const SweepConfig& cfg, std::size_t axis_index) {
  SyntheticEnvSpec spec = cfg.base;
  const double v = cfg.axis_values.at(axis_index);
  switch (cfg.axis) {
    case SweepAxis::n_companies:
      spec.n_companies = static_cast<Index>(v);
      break;
    case SweepAxis::n_seekers:
      spec.n_seekers = static_cast<Index>(v);
      break;
    case SweepAxis::sparsity:
      spec.theta_sp = v;
      break;
  }
  spec.seed = derive_seed(derive_seed(cfg.master_seed, kEnvStream), axis_index);
  return spec;
}

std::uint64_t replication_seed(std::uint64_t master_seed, std::size_t axis_index, std::int64_t rep) {
  return derive_seed(derive_seed(derive_seed(master_seed, kReplicationStream), axis_index),
                     static_cast<std::uint64_t>(rep));
}

double error_rate(std::span<const double> estimates_pi, std::span<const double> estimates_pi0, double true_pi,
                  double true_pi0) {
  if (estimates_pi.size() != estimates_pi0.size()) throw ShapeError("estimate columns differ in length");
  if (estimates_pi.empty()) throw ConfigError("no estimates for the error rate");
  const bool truly_better = true_pi >= true_pi0;
  std::size_t errors = 0;
  for (std::size_t k = 0; k < estimates_pi.size(); ++k) {
    const bool says_better = estimates_pi[k] >= estimates_pi0[k];
    if (says_better != truly_better) ++errors;
  }
  return static_cast<double>(errors) / static_cast<double>(estimates_pi.size());
}

ExperimentReport run_sweep(const SweepConfig& cfg) {
  cfg.validate();
  ExperimentReport report;
  const std::span<const EstimatorId> ids(cfg.estimators);
  const std::size_t n_ids = ids.size();

  for (std::size_t a = 0; a < cfg.axis_values.size(); ++a) {
    const SyntheticEnvSpec spec = axis_environment(cfg, a);
    const GeneratedEnvironment generated = generate_environment(spec);
    const Environment& env = generated.env;
    const ContextSet& contexts = env.contexts();
    const Policy pi0 = softmax_logging_policy(env, spec.beta);
    const Policy pi = epsilon_greedy_target_policy(env, spec.epsilon);
    const double v_pi = true_policy_value(env, pi);
    const double v_pi0 = true_policy_value(env, pi0);

    std::optional<EmbeddingMap> embedding;
    if (needs_embedding(ids)) {
      embedding = make_embedding_map(
          contexts, cfg.n_clusters > 0 ? cfg.n_clusters : default_cluster_count(spec.n_seekers));
    }
    const EstimatorOptions options{cfg.switch_lambda, embedding ? &*embedding : nullptr};
    const RewardModel oracle = oracle_model(env);

    std::vector<ReplicationResult> results(static_cast<std::size_t>(cfg.n_replications));
    parallel_for(results.size(), cfg.jobs, [&](std::size_t k) {
      ReplicationResult& out = results[k];
      try {
        const LoggedDataset data =
            sample_logged_data(env, pi0, replication_seed(cfg.master_seed, a, static_cast<std::int64_t>(k)));
        RewardModel model;
        if (cfg.model_source == ModelSource::fitted) {
          FitDiagnostics diag;
          model = fit_reward_models(data, contexts, cfg.fit, &diag);
          out.fit_warnings = static_cast<std::int64_t>(diag.warnings.size());
        } else {
          model = oracle;
        }
        if (cfg.propensity_source == PropensitySource::estimated) {
          model.pi0_hat = fit_logging_policy(data, contexts, cfg.fit);
        }
        out.estimates_pi = estimate_many(ids, EstimatorInput(data, pi, model, cfg.propensity_source, &pi0), options);
        out.estimates_pi0 =
            estimate_many(ids, EstimatorInput(data, pi0, model, cfg.propensity_source, &pi0), options);
        for (double x : out.estimates_pi) {
          if (!std::isfinite(x)) throw NumericalError("non-finite estimate");
        }
        for (double x : out.estimates_pi0) {
          if (!std::isfinite(x)) throw NumericalError("non-finite estimate");
        }
        out.ok = true;
      } catch (const Error& e) {
        out.ok = false;
        out.error = e.what();
      }
    });

    AxisDiagnostics diag;
    diag.axis_value = cfg.axis_values[a];
    std::vector<const ReplicationResult*> ok;
    for (const auto& r : results) {
      diag.fit_warnings += r.fit_warnings;
      if (r.ok) {
        ok.push_back(&r);
      } else {
        if (diag.failed_replications == 0) diag.first_failure = r.error;
        ++diag.failed_replications;
      }
    }
    if (diag.failed_replications * 100 > cfg.n_replications || ok.size() < 2) {
      throw NumericalError(std::to_string(diag.failed_replications) + " of " + std::to_string(cfg.n_replications) +
                           " replications failed at " + to_string(cfg.axis) + " = " + format_number(diag.axis_value) +
                           ": " + diag.first_failure);
    }

    std::vector<double> col_pi(ok.size()), col_pi0(ok.size());
    for (std::size_t e = 0; e < n_ids; ++e) {
      for (std::size_t k = 0; k < ok.size(); ++k) {
        col_pi[k] = ok[k]->estimates_pi[e];
        col_pi0[k] = ok[k]->estimates_pi0[e];
      }
      const MonteCarloProfile p = summarize_estimates(col_pi, v_pi, ids[e]);
      ReportRow row;
      row.axis = to_string(cfg.axis);
      row.axis_value = cfg.axis_values[a];
      row.estimator = to_string(ids[e]);
      row.squared_bias = p.bias * p.bias;
      row.variance = p.variance.value_or(0.0);
      row.mse = p.mse;
      row.error_rate = error_rate(col_pi, col_pi0, v_pi, v_pi0);
      row.mean_estimate = p.mean;
      row.true_value = v_pi;
      row.n_reps = p.n_reps;
      row.se_mse = p.se_mse;
      report.rows.push_back(std::move(row));
    }
    report.diagnostics.push_back(std::move(diag));
  }
  return report;
}

}  // namespace matchope::harness
