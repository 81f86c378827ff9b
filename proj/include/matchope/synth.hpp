#pragma once

#include "matchope/core.hpp"

#include <cstdint>

namespace matchope {

struct SyntheticEnvSpec {
  Index n_companies = 1000;
  Index n_seekers = 100;
  Index dim = 10;
  /// Sparsity strength; larger values push both reward surfaces towards 0.
  double theta_sp = 2.0;
  /// Inverse temperature of the softmax logging policy.
  double beta = -0.5;
  /// Exploration rate of the epsilon-greedy target policy.
  double epsilon = 0.2;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Parameters drawn while generating an environment. b_s and b_r are per-pair
/// sparsity offsets in [0, 2].
struct SyntheticParams {
  Vector theta_s;
  Vector theta_r;
  Matrix M_s;
  Matrix M_r;
  Matrix b_s;
  Matrix b_r;
};

struct GeneratedEnvironment {
  Environment env;
  SyntheticParams params;
};

/// Draws contexts and parameters from `spec.seed` and evaluates the two reward
/// surfaces. Deterministic in the seed.
GeneratedEnvironment generate_environment(const SyntheticEnvSpec& spec);

/// Evaluates
///   q_s = sigmoid((x_c - x_c^2) theta_s + (x_c^3 + x_c^2 - x_c) M_s x_j' - theta_sp b_s)
///   q_r = sigmoid((x_j^3 + x_j^2 - x_j) theta_r + (x_j - x_j^2) M_r x_c' - theta_sp b_r)
/// with elementwise powers, for every (company, seeker) pair.
Environment compute_reward_surfaces(const ContextSet& contexts, const SyntheticParams& params, double theta_sp);

/// pi0(j|c) proportional to exp(beta * q_m(c, j)).
Policy softmax_logging_policy(const Environment& env, double beta);

/// (1 - epsilon) on the row argmax of q_m (lowest index on ties) plus epsilon/|J| everywhere.
Policy epsilon_greedy_target_policy(const Environment& env, double epsilon);

/// Samples one record per company: j ~ pi0(.|c), s ~ Bernoulli(q_s), r ~ Bernoulli(q_r) when s = 1.
/// Company c draws from its own generator seeded with derive_seed(seed, c).
LoggedDataset sample_logged_data(const Environment& env, const Policy& pi0, std::uint64_t seed);

}  // namespace matchope
