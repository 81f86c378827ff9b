#include "matchope/opl.hpp"

#include "matchope/errors.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <sstream>

namespace matchope {
namespace {

Matrix softmax_rows(const Matrix& scores) {
  Matrix probs(scores.rows(), scores.cols());
  for (Index c = 0; c < scores.rows(); ++c) {
    const auto row = scores.row(c);
    Eigen::RowVectorXd e = (row.array() - row.maxCoeff()).exp();
    probs.row(c) = e / e.sum();
  }
  return probs;
}

void check_params(const SoftmaxPolicyParams& params, const PairFeatureMap& features) {
  if (params.theta.size() != features.size()) {
    std::ostringstream msg;
    msg << "policy parameter has length " << params.theta.size() << " but the pair features have length "
        << features.size();
    throw ShapeError(msg.str());
  }
  if (!params.theta.allFinite()) throw ValidationError("policy parameter has non-finite entries");
}

const Matrix& need(const std::optional<Matrix>& field, const char* name, GradientEstimator kind) {
  if (!field) throw ConfigError(to_string(kind) + " requires " + name + " in the reward model");
  return *field;
}

bool uses_records(GradientEstimator kind) { return kind != GradientEstimator::dm_pg; }
bool uses_dm_term(GradientEstimator kind) {
  return kind == GradientEstimator::dm_pg || kind == GradientEstimator::dr_pg || kind == GradientEstimator::dpr_pg;
}

Vector gradient_at(GradientEstimator kind, const LoggedDataset& dataset, const Matrix& probs,
                   const PairFeatureMap& features, const RewardModel& model, const GradientOptions& options) {
  const Index n_c = dataset.n_companies();
  if (features.n_companies() != n_c || features.n_seekers() != dataset.n_seekers()) {
    throw ShapeError("dataset does not match the context set");
  }
  model.validate(n_c, dataset.n_seekers());
  const Matrix mean_features = features.weighted_sums(probs);
  Vector grad = Vector::Zero(features.size());

  if (uses_dm_term(kind)) {
    const Matrix& q_hat_m = need(model.q_hat_m, "q_hat_m", kind);
    const Matrix weighted = probs.cwiseProduct(q_hat_m);
    const Matrix sums = features.weighted_sums(weighted);
    const Vector totals = weighted.rowwise().sum();
    for (Index c = 0; c < n_c; ++c) {
      grad += (sums.row(c) - totals(c) * mean_features.row(c)).transpose();
    }
  }

  if (uses_records(kind)) {
    const Matrix* q_hat_r = nullptr;
    const Matrix* q_hat_m = nullptr;
    if (kind == GradientEstimator::dips_pg || kind == GradientEstimator::dpr_pg) {
      q_hat_r = &need(model.q_hat_r, "q_hat_r", kind);
    }
    if (kind == GradientEstimator::dr_pg || kind == GradientEstimator::dpr_pg) {
      q_hat_m = &need(model.q_hat_m, "q_hat_m", kind);
    }
    const Policy* pi0_hat = nullptr;
    if (options.source == PropensitySource::estimated) {
      if (!model.pi0_hat) throw ConfigError("estimated propensities require pi0_hat in the reward model");
      pi0_hat = &*model.pi0_hat;
    } else if (!dataset.propensities_known()) {
      throw PreconditionError("dataset has no logged propensities; use the estimated propensity source");
    }

    Eigen::RowVectorXd f(features.size());
    for (Index c = 0; c < n_c; ++c) {
      const auto& rec = dataset[c];
      const Index j = rec.seeker;
      const double logging = pi0_hat ? (*pi0_hat)(c, j) : rec.logging_prob;
      if (!(logging > 0.0)) throw PreconditionError("zero logging propensity violates common support");
      double w = probs(c, j) / logging;
      if (options.weight_clip) w = std::min(w, *options.weight_clip);

      double reward = 0.0;
      switch (kind) {
        case GradientEstimator::ips_pg:
          reward = rec.m;
          break;
        case GradientEstimator::dr_pg:
          reward = rec.m - (*q_hat_m)(c, j);
          break;
        case GradientEstimator::dips_pg:
          reward = rec.s * (*q_hat_r)(c, j);
          break;
        case GradientEstimator::dpr_pg:
          reward = rec.s * (*q_hat_r)(c, j) - (*q_hat_m)(c, j);
          break;
        case GradientEstimator::dm_pg:
          break;
      }
      const double coef = w * reward;
      if (coef == 0.0) continue;
      features.write_features(c, j, f);
      grad += coef * (f - mean_features.row(c)).transpose();
    }
  }
  return grad / static_cast<double>(n_c);
}

Vector gradient(GradientEstimator kind, const LoggedDataset& dataset, const SoftmaxPolicyParams& params,
                const RewardModel& model, const ContextSet& contexts, const GradientOptions& options) {
  const PairFeatureMap features(contexts, params.feature_mode);
  check_params(params, features);
  return gradient_at(kind, dataset, softmax_rows(features.scores(params.theta)), features, model, options);
}

}  // namespace

SoftmaxPolicyParams SoftmaxPolicyParams::zeros(Index dim, FeatureMode mode) {
  return SoftmaxPolicyParams{Vector::Zero(pair_feature_length(dim, mode)), mode};
}

std::string to_string(GradientEstimator kind) {
  switch (kind) {
    case GradientEstimator::dm_pg:
      return "dm_pg";
    case GradientEstimator::ips_pg:
      return "ips_pg";
    case GradientEstimator::dr_pg:
      return "dr_pg";
    case GradientEstimator::dips_pg:
      return "dips_pg";
    case GradientEstimator::dpr_pg:
      return "dpr_pg";
  }
  return "?";
}

GradientEstimator parse_gradient_estimator(std::string_view text) {
  std::string key(text);
  std::transform(key.begin(), key.end(), key.begin(), [](unsigned char ch) { return std::tolower(ch); });
  std::replace(key.begin(), key.end(), '-', '_');
  for (auto kind : {GradientEstimator::dm_pg, GradientEstimator::ips_pg, GradientEstimator::dr_pg,
                    GradientEstimator::dips_pg, GradientEstimator::dpr_pg}) {
    if (key == to_string(kind)) return kind;
  }
  throw ConfigError("unknown gradient estimator '" + std::string(text) + "'");
}

EstimatorId value_estimator(GradientEstimator kind) {
  switch (kind) {
    case GradientEstimator::dm_pg:
      return EstimatorId::dm;
    case GradientEstimator::ips_pg:
      return EstimatorId::ips;
    case GradientEstimator::dr_pg:
      return EstimatorId::dr;
    case GradientEstimator::dips_pg:
      return EstimatorId::dips;
    case GradientEstimator::dpr_pg:
      return EstimatorId::dpr;
  }
  return EstimatorId::dips;
}

void LearnConfig::validate() const {
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) {
    throw ConfigError("learning_rate must be a finite non-negative number");
  }
  if (n_iterations < 1) throw ConfigError("n_iterations must be at least 1");
  if (weight_clip && !(*weight_clip > 0.0)) throw ConfigError("weight_clip must be positive");
}

Policy policy_probs(const SoftmaxPolicyParams& params, const ContextSet& contexts) {
  const PairFeatureMap features(contexts, params.feature_mode);
  check_params(params, features);
  return Policy(softmax_rows(features.scores(params.theta)), "softmax_policy");
}

Vector score_function(const SoftmaxPolicyParams& params, const ContextSet& contexts, Index c, Index j) {
  const PairFeatureMap features(contexts, params.feature_mode);
  check_params(params, features);
  if (c < 0 || c >= contexts.n_companies() || j < 0 || j >= contexts.n_seekers()) {
    throw PreconditionError("pair index out of range");
  }
  const std::vector<Index> one{c};
  const Matrix scores = features.scores(params.theta, one);
  const Matrix probs = softmax_rows(scores);
  Vector mean = Vector::Zero(features.size());
  Eigen::RowVectorXd f(features.size());
  for (Index k = 0; k < contexts.n_seekers(); ++k) {
    features.write_features(c, k, f);
    mean += probs(0, k) * f.transpose();
  }
  return features.features(c, j) - mean;
}

Vector grad_dips_pg(const LoggedDataset& dataset, const SoftmaxPolicyParams& params, const RewardModel& model,
                    const ContextSet& contexts, const GradientOptions& options) {
  return gradient(GradientEstimator::dips_pg, dataset, params, model, contexts, options);
}

Vector grad_dpr_pg(const LoggedDataset& dataset, const SoftmaxPolicyParams& params, const RewardModel& model,
                   const ContextSet& contexts, const GradientOptions& options) {
  return gradient(GradientEstimator::dpr_pg, dataset, params, model, contexts, options);
}

Vector grad_baseline_pg(const LoggedDataset& dataset, const SoftmaxPolicyParams& params, const RewardModel& model,
                        const ContextSet& contexts, GradientEstimator kind, const GradientOptions& options) {
  if (kind != GradientEstimator::dm_pg && kind != GradientEstimator::ips_pg && kind != GradientEstimator::dr_pg) {
    throw ConfigError("baseline gradient must be dm_pg, ips_pg or dr_pg");
  }
  return gradient(kind, dataset, params, model, contexts, options);
}

Vector policy_gradient(GradientEstimator kind, const LoggedDataset& dataset, const SoftmaxPolicyParams& params,
                       const RewardModel& model, const ContextSet& contexts, const GradientOptions& options) {
  return gradient(kind, dataset, params, model, contexts, options);
}

LearnResult learn_policy(const LoggedDataset& dataset, const ContextSet& contexts, const RewardModel& model,
                         const LearnConfig& cfg, const Environment* env) {
  cfg.validate();
  const PairFeatureMap features(contexts, cfg.feature_mode);
  const GradientOptions options{cfg.propensity_source, cfg.weight_clip};
  const EstimatorId value_id = value_estimator(cfg.gradient_estimator);

  LearnResult result;
  result.params = SoftmaxPolicyParams::zeros(contexts.dim(), cfg.feature_mode);
  auto record = [&](const Matrix& probs) {
    const Policy pi(probs, "softmax_policy");
    const EstimatorInput input(dataset, pi, model, cfg.propensity_source);
    result.estimated_values.push_back(estimate(value_id, input));
    if (env) result.true_values.push_back(true_policy_value(*env, pi));
  };

  auto probs_at = [&](int t) {
    Matrix probs = softmax_rows(features.scores(result.params.theta));
    if (!probs.allFinite()) throw NumericalError("non-finite policy at iteration " + std::to_string(t));
    return probs;
  };

  for (int t = 0; t < cfg.n_iterations; ++t) {
    const Matrix probs = probs_at(t);
    record(probs);
    const Vector g = gradient_at(cfg.gradient_estimator, dataset, probs, features, model, options);
    if (!g.allFinite()) {
      throw NumericalError("non-finite policy gradient at iteration " + std::to_string(t));
    }
    result.params.theta += cfg.learning_rate * g;
  }
  record(probs_at(cfg.n_iterations));
  return result;
}

}  // namespace matchope
