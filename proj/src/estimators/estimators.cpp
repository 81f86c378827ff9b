#include "matchope/estimators.hpp"

#include "matchope/errors.hpp"
#include "matchope/numeric.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <numeric>
#include <optional>

namespace matchope {
namespace {

std::string lower(std::string_view text) {
  std::string out(text);
  std::transform(out.begin(), out.end(), out.begin(), [](unsigned char ch) { return std::tolower(ch); });
  return out;
}

const Matrix& need(const std::optional<Matrix>& field, const char* name, EstimatorId id) {
  if (!field) throw ConfigError(to_string(id) + " requires " + name + " in the reward model");
  return *field;
}

// Ratio with the support convention shared by every weighted estimator.
double support_ratio(double target, double logging, EstimatorDiagnostics* diagnostics) {
  if (logging > 0.0) return target / logging;
  if (target > 0.0) throw PreconditionError("target policy puts mass on an action the logging policy never takes");
  if (diagnostics) ++diagnostics->zero_support_records;
  return 0.0;
}

void check_input(const EstimatorInput& input) {
  const auto& data = *input.dataset;
  require_same_shape(*input.target, data.n_companies(), data.n_seekers(), "target policy");
  input.model->validate(data.n_companies(), data.n_seekers());
  if (input.logging_policy) {
    require_same_shape(*input.logging_policy, data.n_companies(), data.n_seekers(), "logging policy");
  }
}

const Policy& logging_rows(const EstimatorInput& input, EstimatorId id) {
  if (input.source == PropensitySource::estimated) {
    if (!input.model->pi0_hat) throw ConfigError(to_string(id) + " with estimated propensities requires pi0_hat");
    return *input.model->pi0_hat;
  }
  if (!input.logging_policy) {
    throw ConfigError(to_string(id) + " with logged propensities requires the full logging policy");
  }
  return *input.logging_policy;
}

// Lazily computed pieces shared between estimators on one input.
class TermCache {
 public:
  explicit TermCache(const EstimatorInput& input) : input_(input) { check_input(input); }

  const Vector& weights() {
    if (!weights_) weights_ = estimator_weights(input_);
    return *weights_;
  }

  // Per-company DM term sum_j pi(j|c) q_hat_m(c, j).
  const std::vector<double>& dm_terms(EstimatorId id) {
    if (!dm_terms_) {
      const Matrix& q_hat_m = need(input_.model->q_hat_m, "q_hat_m", id);
      const Matrix& pi = input_.target->probs();
      std::vector<double> terms(static_cast<std::size_t>(pi.rows()));
      for (Index c = 0; c < pi.rows(); ++c) {
        CompensatedSum acc;
        for (Index j = 0; j < pi.cols(); ++j) acc.add(pi(c, j) * q_hat_m(c, j));
        terms[static_cast<std::size_t>(c)] = acc.value();
      }
      dm_terms_ = std::move(terms);
    }
    return *dm_terms_;
  }

  Vector marginal_weights(const EmbeddingMap& embedding, EstimatorId id) {
    const auto& data = *input_.dataset;
    if (embedding.n_seekers() != data.n_seekers()) throw ShapeError("embedding map does not match the dataset");
    const Matrix target = embedding.marginalize(input_.target->probs());
    const Matrix logging = embedding.marginalize(logging_rows(input_, id).probs());
    Vector w(data.n_companies());
    for (Index c = 0; c < data.n_companies(); ++c) {
      const Index e = embedding.cluster(data[c].seeker);
      if (!(logging(c, e) > 0.0) && target(c, e) > 0.0) {
        throw PreconditionError("logged action's cluster has zero logging mass");
      }
      w(c) = support_ratio(target(c, e), logging(c, e), input_.diagnostics);
    }
    return w;
  }

  const LoggedDataset& data() const { return *input_.dataset; }
  const RewardModel& model() const { return *input_.model; }

 private:
  const EstimatorInput& input_;
  std::optional<Vector> weights_;
  std::optional<std::vector<double>> dm_terms_;
};

template <typename Term>
double mean_over_companies(Index n, Term term) {
  CompensatedSum acc;
  for (Index c = 0; c < n; ++c) acc.add(term(c));
  return acc.value() / static_cast<double>(n);
}

// Every estimator below funnels through these few expressions so that the
// collapse identities hold bit for bit.
double dips_reward(const LoggedRecord& rec, const Matrix& q_hat_r, Index c) {
  return static_cast<double>(rec.s) * q_hat_r(c, rec.seeker);
}

double run(EstimatorId id, TermCache& cache, const EstimatorOptions& options) {
  const auto& data = cache.data();
  const auto& model = cache.model();
  const Index n = data.n_companies();
  switch (id) {
    case EstimatorId::dm: {
      const auto& dm = cache.dm_terms(id);
      return mean_over_companies(n, [&](Index c) { return dm[static_cast<std::size_t>(c)]; });
    }
    case EstimatorId::ips: {
      const Vector& w = cache.weights();
      return mean_over_companies(n, [&](Index c) { return w(c) * static_cast<double>(data[c].m); });
    }
    case EstimatorId::dips: {
      const Matrix& q_hat_r = need(model.q_hat_r, "q_hat_r", id);
      const Vector& w = cache.weights();
      return mean_over_companies(n, [&](Index c) { return w(c) * dips_reward(data[c], q_hat_r, c); });
    }
    case EstimatorId::dr:
    case EstimatorId::switch_dr: {
      const Matrix& q_hat_m = need(model.q_hat_m, "q_hat_m", id);
      const auto& dm = cache.dm_terms(id);
      const Vector& w = cache.weights();
      const double lambda = id == EstimatorId::dr ? INFINITY : options.switch_lambda;
      if (!(lambda >= 0.0)) throw ConfigError("switch lambda must be non-negative");
      return mean_over_companies(n, [&](Index c) {
        const auto& rec = data[c];
        const double correction = w(c) <= lambda ? w(c) * (static_cast<double>(rec.m) - q_hat_m(c, rec.seeker)) : 0.0;
        return correction + dm[static_cast<std::size_t>(c)];
      });
    }
    case EstimatorId::dpr:
    case EstimatorId::extended_switch_dr: {
      const Matrix& q_hat_r = need(model.q_hat_r, "q_hat_r", id);
      const Matrix& q_hat_m = need(model.q_hat_m, "q_hat_m", id);
      const auto& dm = cache.dm_terms(id);
      const Vector& w = cache.weights();
      const double lambda = id == EstimatorId::dpr ? INFINITY : options.switch_lambda;
      if (!(lambda >= 0.0)) throw ConfigError("switch lambda must be non-negative");
      return mean_over_companies(n, [&](Index c) {
        const auto& rec = data[c];
        const double correction =
            w(c) <= lambda ? w(c) * (dips_reward(rec, q_hat_r, c) - q_hat_m(c, rec.seeker)) : 0.0;
        return correction + dm[static_cast<std::size_t>(c)];
      });
    }
    case EstimatorId::mips:
    case EstimatorId::extended_mips: {
      if (!options.embedding) throw ConfigError(to_string(id) + " requires an embedding map");
      const Vector w = cache.marginal_weights(*options.embedding, id);
      if (id == EstimatorId::mips) {
        return mean_over_companies(n, [&](Index c) { return w(c) * static_cast<double>(data[c].m); });
      }
      const Matrix& q_hat_r = need(model.q_hat_r, "q_hat_r", id);
      return mean_over_companies(n, [&](Index c) { return w(c) * dips_reward(data[c], q_hat_r, c); });
    }
  }
  throw ConfigError("unknown estimator");
}

}  // namespace

std::string to_string(EstimatorId id) {
  switch (id) {
    case EstimatorId::dm:
      return "DM";
    case EstimatorId::ips:
      return "IPS";
    case EstimatorId::dr:
      return "DR";
    case EstimatorId::dips:
      return "DiPS";
    case EstimatorId::dpr:
      return "DPR";
    case EstimatorId::switch_dr:
      return "SwitchDR";
    case EstimatorId::extended_switch_dr:
      return "ExtSwitchDR";
    case EstimatorId::mips:
      return "MIPS";
    case EstimatorId::extended_mips:
      return "ExtMIPS";
  }
  return "?";
}

EstimatorId parse_estimator(std::string_view text) {
  const std::string key = lower(text);
  for (EstimatorId id : kAllEstimators) {
    if (key == lower(to_string(id))) return id;
  }
  if (key == "switch_dr") return EstimatorId::switch_dr;
  if (key == "extended_switch_dr") return EstimatorId::extended_switch_dr;
  if (key == "extended_mips") return EstimatorId::extended_mips;
  throw ConfigError("unknown estimator '" + std::string(text) + "'");
}

std::string to_string(PropensitySource source) {
  return source == PropensitySource::logged ? "logged" : "estimated";
}

PropensitySource parse_propensity_source(std::string_view text) {
  const std::string key = lower(text);
  if (key == "logged") return PropensitySource::logged;
  if (key == "estimated") return PropensitySource::estimated;
  throw ConfigError("unknown propensity source '" + std::string(text) + "'");
}

EmbeddingMap::EmbeddingMap(std::vector<Index> assignment, Index n_clusters)
    : assignment_(std::move(assignment)), n_clusters_(n_clusters) {
  if (n_clusters_ < 1) throw ValidationError("embedding map needs at least one cluster");
  std::vector<bool> used(static_cast<std::size_t>(n_clusters_), false);
  for (Index e : assignment_) {
    if (e < 0 || e >= n_clusters_) throw ValidationError("cluster id out of range");
    used[static_cast<std::size_t>(e)] = true;
  }
  if (std::find(used.begin(), used.end(), false) != used.end()) {
    throw ValidationError("every cluster must contain at least one seeker");
  }
}

EmbeddingMap EmbeddingMap::singletons(Index n_seekers) {
  std::vector<Index> a(static_cast<std::size_t>(n_seekers));
  std::iota(a.begin(), a.end(), Index{0});
  return EmbeddingMap(std::move(a), n_seekers);
}

EmbeddingMap EmbeddingMap::single_cluster(Index n_seekers) {
  return EmbeddingMap(std::vector<Index>(static_cast<std::size_t>(n_seekers), 0), 1);
}

Matrix EmbeddingMap::marginalize(const Matrix& probs) const {
  if (probs.cols() != n_seekers()) throw ShapeError("policy width does not match the embedding map");
  Matrix out(probs.rows(), n_clusters_);
  std::vector<CompensatedSum> acc;
  for (Index c = 0; c < probs.rows(); ++c) {
    acc.assign(static_cast<std::size_t>(n_clusters_), CompensatedSum{});
    for (Index j = 0; j < probs.cols(); ++j) acc[static_cast<std::size_t>(cluster(j))].add(probs(c, j));
    for (Index e = 0; e < n_clusters_; ++e) out(c, e) = acc[static_cast<std::size_t>(e)].value();
  }
  return out;
}

Index default_cluster_count(Index n_seekers) { return (n_seekers + 9) / 10; }

EmbeddingMap make_embedding_map(const ContextSet& contexts, Index n_clusters) {
  const Index n_j = contexts.n_seekers();
  if (n_clusters < 1 || n_clusters > n_j) throw ConfigError("cluster count must lie in [1, |J|]");
  const Matrix& x = contexts.seeker();
  const Eigen::RowVectorXd mean = x.colwise().mean();
  const Eigen::MatrixXd centered = x.rowwise() - mean;
  const Eigen::MatrixXd cov = centered.transpose() * centered;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov);
  Vector direction = solver.eigenvectors().col(cov.cols() - 1);
  Index lead = 0;
  direction.cwiseAbs().maxCoeff(&lead);
  if (direction(lead) < 0.0) direction = -direction;
  const Vector projection = centered * direction;

  std::vector<Index> order(static_cast<std::size_t>(n_j));
  std::iota(order.begin(), order.end(), Index{0});
  std::sort(order.begin(), order.end(), [&](Index a, Index b) {
    return projection(a) != projection(b) ? projection(a) < projection(b) : a < b;
  });
  std::vector<Index> assignment(static_cast<std::size_t>(n_j));
  for (Index rank = 0; rank < n_j; ++rank) {
    assignment[static_cast<std::size_t>(order[static_cast<std::size_t>(rank)])] = rank * n_clusters / n_j;
  }
  return EmbeddingMap(std::move(assignment), n_clusters);
}

Vector estimator_weights(const EstimatorInput& input) {
  const auto& data = *input.dataset;
  const Policy& pi = *input.target;
  require_same_shape(pi, data.n_companies(), data.n_seekers(), "target policy");
  Vector w(data.n_companies());
  if (input.source == PropensitySource::logged) {
    if (!data.propensities_known()) {
      throw PreconditionError("dataset has no logged propensities; use the estimated propensity source");
    }
    for (Index c = 0; c < data.n_companies(); ++c) {
      const auto& rec = data[c];
      w(c) = support_ratio(pi(c, rec.seeker), rec.logging_prob, input.diagnostics);
    }
    return w;
  }
  if (!input.model->pi0_hat) throw ConfigError("estimated propensities require pi0_hat in the reward model");
  const Policy& pi0 = *input.model->pi0_hat;
  require_same_shape(pi0, data.n_companies(), data.n_seekers(), "pi0_hat");
  for (Index c = 0; c < data.n_companies(); ++c) {
    const Index j = data[c].seeker;
    w(c) = support_ratio(pi(c, j), pi0(c, j), input.diagnostics);
  }
  return w;
}

double estimate_dm(const EstimatorInput& input) { return estimate(EstimatorId::dm, input); }
double estimate_ips(const EstimatorInput& input) { return estimate(EstimatorId::ips, input); }
double estimate_dr(const EstimatorInput& input) { return estimate(EstimatorId::dr, input); }
double estimate_dips(const EstimatorInput& input) { return estimate(EstimatorId::dips, input); }
double estimate_dpr(const EstimatorInput& input) { return estimate(EstimatorId::dpr, input); }

double estimate_switch_dr(const EstimatorInput& input, double lambda) {
  return estimate(EstimatorId::switch_dr, input, EstimatorOptions{lambda, nullptr});
}

double estimate_extended_switch_dr(const EstimatorInput& input, double lambda) {
  return estimate(EstimatorId::extended_switch_dr, input, EstimatorOptions{lambda, nullptr});
}

double estimate_mips(const EstimatorInput& input, const EmbeddingMap& embedding) {
  return estimate(EstimatorId::mips, input, EstimatorOptions{kDefaultSwitchLambda, &embedding});
}

double estimate_extended_mips(const EstimatorInput& input, const EmbeddingMap& embedding) {
  return estimate(EstimatorId::extended_mips, input, EstimatorOptions{kDefaultSwitchLambda, &embedding});
}

double estimate(EstimatorId id, const EstimatorInput& input, const EstimatorOptions& options) {
  TermCache cache(input);
  return run(id, cache, options);
}

std::vector<double> estimate_many(std::span<const EstimatorId> ids, const EstimatorInput& input,
                                  const EstimatorOptions& options) {
  TermCache cache(input);
  std::vector<double> out;
  out.reserve(ids.size());
  for (EstimatorId id : ids) out.push_back(run(id, cache, options));
  return out;
}

}  // namespace matchope
