#include "matchope/synth.hpp"

#include "matchope/errors.hpp"
#include "matchope/numeric.hpp"
#include "matchope/random.hpp"

#include <cmath>

namespace matchope {
namespace {

Matrix standard_normal(Rng& rng, Index rows, Index cols) {
  Matrix m(rows, cols);
  for (Index i = 0; i < rows; ++i) {
    for (Index k = 0; k < cols; ++k) m(i, k) = rng.normal();
  }
  return m;
}

Matrix uniform_matrix(Rng& rng, Index rows, Index cols, double lo, double hi) {
  Matrix m(rows, cols);
  for (Index i = 0; i < rows; ++i) {
    for (Index k = 0; k < cols; ++k) m(i, k) = rng.uniform(lo, hi);
  }
  return m;
}

}  // namespace

void SyntheticEnvSpec::validate() const {
  if (n_companies < 1) throw ConfigError("n_companies must be at least 1");
  if (n_seekers < 2) throw ConfigError("n_seekers must be at least 2");
  if (dim < 1) throw ConfigError("dim must be at least 1");
  if (!(epsilon >= 0.0 && epsilon <= 1.0)) throw ConfigError("epsilon must lie in [0, 1]");
  if (!(theta_sp >= 0.0) || !std::isfinite(theta_sp)) throw ConfigError("theta_sp must be finite and >= 0");
  if (!std::isfinite(beta)) throw ConfigError("beta must be finite");
}

GeneratedEnvironment generate_environment(const SyntheticEnvSpec& spec) {
  spec.validate();
  Rng rng(spec.seed);
  // Draw order is part of the reproducibility contract.
  Matrix company = standard_normal(rng, spec.n_companies, spec.dim);
  Matrix seeker = standard_normal(rng, spec.n_seekers, spec.dim);
  SyntheticParams params;
  params.theta_s = standard_normal(rng, spec.dim, 1).col(0);
  params.theta_r = standard_normal(rng, spec.dim, 1).col(0);
  params.M_s = standard_normal(rng, spec.dim, spec.dim);
  params.M_r = standard_normal(rng, spec.dim, spec.dim);
  params.b_s = uniform_matrix(rng, spec.n_companies, spec.n_seekers, 0.0, 2.0);
  params.b_r = uniform_matrix(rng, spec.n_companies, spec.n_seekers, 0.0, 2.0);

  ContextSet contexts(std::move(company), std::move(seeker));
  Environment env = compute_reward_surfaces(contexts, params, spec.theta_sp);
  return GeneratedEnvironment{std::move(env), std::move(params)};
}

Environment compute_reward_surfaces(const ContextSet& contexts, const SyntheticParams& params, double theta_sp) {
  const Index n_c = contexts.n_companies();
  const Index n_j = contexts.n_seekers();
  const Index d = contexts.dim();
  if (params.theta_s.size() != d || params.theta_r.size() != d || params.M_s.rows() != d || params.M_s.cols() != d ||
      params.M_r.rows() != d || params.M_r.cols() != d) {
    throw ShapeError("synthetic parameters do not match the context dimension");
  }
  if (params.b_s.rows() != n_c || params.b_s.cols() != n_j || params.b_r.rows() != n_c || params.b_r.cols() != n_j) {
    throw ShapeError("sparsity offsets do not match the environment size");
  }

  const auto xc = contexts.company().array();
  const auto xj = contexts.seeker().array();
  const Matrix xc2 = xc.square().matrix();
  const Matrix xj2 = xj.square().matrix();

  // First stage: company-side polynomial terms.
  const Vector s_base = (contexts.company() - xc2) * params.theta_s;
  const Matrix s_left = (xc.cube() + xc.square() - xc).matrix() * params.M_s;
  const Matrix s_inter = s_left * contexts.seeker().transpose();

  // Second stage: roles of company and seeker swapped.
  const Vector r_base = (xj.cube() + xj.square() - xj).matrix() * params.theta_r;
  const Matrix r_left = (contexts.seeker() - xj2) * params.M_r;
  const Matrix r_inter = contexts.company() * r_left.transpose();

  Matrix q_s(n_c, n_j);
  Matrix q_r(n_c, n_j);
  for (Index c = 0; c < n_c; ++c) {
    for (Index j = 0; j < n_j; ++j) {
      q_s(c, j) = sigmoid(s_base(c) + s_inter(c, j) - theta_sp * params.b_s(c, j));
      q_r(c, j) = sigmoid(r_base(j) + r_inter(c, j) - theta_sp * params.b_r(c, j));
    }
  }
  return Environment(std::move(q_s), std::move(q_r), contexts);
}

Policy softmax_logging_policy(const Environment& env, double beta) {
  Matrix probs(env.n_companies(), env.n_seekers());
  for (Index c = 0; c < env.n_companies(); ++c) {
    const auto logits = (beta * env.q_m().row(c)).eval();
    const double top = logits.maxCoeff();
    CompensatedSum total;
    for (Index j = 0; j < env.n_seekers(); ++j) {
      probs(c, j) = std::exp(logits(j) - top);
      total.add(probs(c, j));
    }
    probs.row(c) /= total.value();
  }
  return Policy(std::move(probs), "logging_softmax");
}

Policy epsilon_greedy_target_policy(const Environment& env, double epsilon) {
  if (!(epsilon >= 0.0 && epsilon <= 1.0)) throw PreconditionError("epsilon must lie in [0, 1]");
  const double floor = epsilon / static_cast<double>(env.n_seekers());
  Matrix probs = Matrix::Constant(env.n_companies(), env.n_seekers(), floor);
  for (Index c = 0; c < env.n_companies(); ++c) {
    Index best = 0;
    for (Index j = 1; j < env.n_seekers(); ++j) {
      if (env.q_m()(c, j) > env.q_m()(c, best)) best = j;
    }
    probs(c, best) = (1.0 - epsilon) + floor;
  }
  return Policy(std::move(probs), "target_epsilon_greedy");
}

LoggedDataset sample_logged_data(const Environment& env, const Policy& pi0, std::uint64_t seed) {
  require_same_shape(pi0, env.n_companies(), env.n_seekers(), "logging policy");
  std::vector<LoggedRecord> records(static_cast<std::size_t>(env.n_companies()));
  for (Index c = 0; c < env.n_companies(); ++c) {
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(c)));
    const auto row = pi0.probs().row(c);
    const auto j = static_cast<Index>(rng.categorical(std::span<const double>(row.data(), static_cast<std::size_t>(row.size()))));
    LoggedRecord rec;
    rec.seeker = j;
    rec.s = rng.bernoulli(env.q_s()(c, j)) ? 1 : 0;
    rec.r = (rec.s == 1 && rng.bernoulli(env.q_r()(c, j))) ? 1 : 0;
    rec.m = rec.s * rec.r;
    rec.logging_prob = pi0(c, j);
    records[static_cast<std::size_t>(c)] = rec;
  }
  return LoggedDataset(std::move(records), env.n_seekers());
}

}  // namespace matchope
