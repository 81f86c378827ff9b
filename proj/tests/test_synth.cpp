#include "matchope/errors.hpp"
#include "matchope/synth.hpp"
#include "support/instances.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace matchope;

namespace {

SyntheticEnvSpec small_spec(std::uint64_t seed = 7) {
  SyntheticEnvSpec spec;
  spec.n_companies = 30;
  spec.n_seekers = 8;
  spec.dim = 3;
  spec.seed = seed;
  return spec;
}

Environment row_env(std::initializer_list<double> qs, std::initializer_list<double> qr) {
  Matrix s(1, static_cast<Index>(qs.size())), r(1, static_cast<Index>(qr.size()));
  Index k = 0;
  for (double x : qs) s(0, k++) = x;
  k = 0;
  for (double x : qr) r(0, k++) = x;
  return Environment(s, r, ContextSet(Matrix::Zero(1, 1), Matrix::Zero(s.cols(), 1)));
}

}  // namespace

TEST(SyntheticEnvSpec, Validation) {
  auto spec = small_spec();
  spec.n_seekers = 1;
  EXPECT_THROW(spec.validate(), ConfigError);
  spec = small_spec();
  spec.epsilon = 1.5;
  EXPECT_THROW(spec.validate(), ConfigError);
  spec = small_spec();
  spec.theta_sp = -1;
  EXPECT_THROW(spec.validate(), ConfigError);
}

TEST(GenerateEnvironment, DeterministicInSeed) {
  const auto a = generate_environment(small_spec(7));
  const auto b = generate_environment(small_spec(7));
  const auto c = generate_environment(small_spec(8));
  EXPECT_TRUE(a.env.q_s() == b.env.q_s());
  EXPECT_TRUE(a.env.q_r() == b.env.q_r());
  EXPECT_TRUE(a.env.contexts().company() == b.env.contexts().company());
  EXPECT_FALSE(a.env.q_s() == c.env.q_s());
}

TEST(GenerateEnvironment, ParameterRanges) {
  const auto g = generate_environment(small_spec());
  EXPECT_GE(g.params.b_s.minCoeff(), 0.0);
  EXPECT_LE(g.params.b_s.maxCoeff(), 2.0);
  EXPECT_GE(g.params.b_r.minCoeff(), 0.0);
  EXPECT_LE(g.params.b_r.maxCoeff(), 2.0);
  EXPECT_EQ(g.params.M_s.rows(), 3);
  EXPECT_EQ(g.params.theta_r.size(), 3);
}

TEST(ComputeRewardSurfaces, MatchesScalarFormula) {
  const auto g = generate_environment(small_spec(3));
  const auto& x = g.env.contexts();
  const auto& p = g.params;
  for (Index c = 0; c < 5; ++c) {
    for (Index j = 0; j < 8; ++j) {
      double zs = -2.0 * p.b_s(c, j);
      double zr = -2.0 * p.b_r(c, j);
      for (Index a = 0; a < 3; ++a) {
        const double xc = x.company()(c, a), xj = x.seeker()(j, a);
        zs += (xc - xc * xc) * p.theta_s(a);
        zr += (xj * xj * xj + xj * xj - xj) * p.theta_r(a);
        for (Index b = 0; b < 3; ++b) {
          zs += (xc * xc * xc + xc * xc - xc) * p.M_s(a, b) * x.seeker()(j, b);
          zr += (xj - xj * xj) * p.M_r(a, b) * x.company()(c, b);
        }
      }
      EXPECT_NEAR(g.env.q_s()(c, j), 1.0 / (1.0 + std::exp(-zs)), 1e-12);
      EXPECT_NEAR(g.env.q_r()(c, j), 1.0 / (1.0 + std::exp(-zr)), 1e-12);
    }
  }
}

TEST(ComputeRewardSurfaces, ZeroContextsGiveOneHalf) {
  const auto g = generate_environment(small_spec());
  const ContextSet zero(Matrix::Zero(30, 3), Matrix::Zero(8, 3));
  const Environment env = compute_reward_surfaces(zero, g.params, 0.0);
  EXPECT_TRUE((env.q_s().array() == 0.5).all());
  EXPECT_TRUE((env.q_r().array() == 0.5).all());
  const Environment sparse = compute_reward_surfaces(g.env.contexts(), g.params, 1e6);
  EXPECT_LT(sparse.q_s().maxCoeff(), 1e-12);
}

TEST(SoftmaxLoggingPolicy, Examples) {
  const Environment env = row_env({0.8, 0.2}, {1.0, 1.0});
  const Policy pi0 = softmax_logging_policy(env, 1.0);
  EXPECT_NEAR(pi0(0, 0), 0.6457, 1e-4);
  EXPECT_NEAR(pi0(0, 1), 0.3543, 1e-4);
  const Policy flat = softmax_logging_policy(env, 0.0);
  EXPECT_DOUBLE_EQ(flat(0, 0), 0.5);
}

TEST(SoftmaxLoggingPolicy, ShiftInvariant) {
  const Environment a = row_env({0.3, 0.5, 0.1}, {1, 1, 1});
  const Environment b = row_env({0.6, 0.8, 0.4}, {1, 1, 1});
  const Policy pa = softmax_logging_policy(a, -0.5);
  const Policy pb = softmax_logging_policy(b, -0.5);
  for (Index j = 0; j < 3; ++j) EXPECT_NEAR(pa(0, j), pb(0, j), 1e-12);
}

TEST(EpsilonGreedy, RowStructure) {
  const auto g = generate_environment(small_spec());
  const Policy pi = epsilon_greedy_target_policy(g.env, 0.2);
  for (Index c = 0; c < pi.n_companies(); ++c) {
    Index top = 0;
    g.env.q_m().row(c).maxCoeff(&top);
    int big = 0, small = 0;
    for (Index j = 0; j < 8; ++j) {
      if (pi(c, j) == 0.8 + 0.2 / 8) ++big;
      if (pi(c, j) == 0.2 / 8) ++small;
    }
    EXPECT_EQ(big, 1);
    EXPECT_EQ(small, 7);
    EXPECT_EQ(pi(c, top), 0.8 + 0.2 / 8);
  }
  const Policy uniform = epsilon_greedy_target_policy(g.env, 1.0);
  EXPECT_DOUBLE_EQ(uniform(0, 0), 1.0 / 8);
  const Policy greedy = epsilon_greedy_target_policy(g.env, 0.0);
  EXPECT_DOUBLE_EQ(greedy.probs().row(0).maxCoeff(), 1.0);
}

TEST(EpsilonGreedy, TiesBreakToLowestIndex) {
  const Environment env = row_env({0.5, 0.5, 0.2}, {1, 1, 1});
  const Policy pi = epsilon_greedy_target_policy(env, 0.0);
  EXPECT_EQ(pi(0, 0), 1.0);
  EXPECT_EQ(pi(0, 1), 0.0);
}

TEST(SampleLoggedData, DegenerateSurfaces) {
  const auto g = generate_environment(small_spec());
  const auto& x = g.env.contexts();
  const Environment ones(Matrix::Ones(30, 8), Matrix::Ones(30, 8), x);
  const Policy pi0 = Policy::uniform(30, 8);
  const LoggedDataset all = sample_logged_data(ones, pi0, 1);
  for (const auto& rec : all.records()) {
    EXPECT_EQ(rec.s, 1);
    EXPECT_EQ(rec.r, 1);
    EXPECT_EQ(rec.m, 1);
    EXPECT_EQ(rec.logging_prob, 1.0 / 8);
  }
  const Environment zeros(Matrix::Zero(30, 8), Matrix::Ones(30, 8), x);
  const LoggedDataset none = sample_logged_data(zeros, pi0, 1);
  for (const auto& rec : none.records()) {
    EXPECT_EQ(rec.s, 0);
    EXPECT_EQ(rec.m, 0);
  }
}

TEST(SampleLoggedData, DeterministicAndConsistent) {
  const auto g = generate_environment(small_spec());
  const Policy pi0 = softmax_logging_policy(g.env, -0.5);
  const auto a = sample_logged_data(g.env, pi0, 99);
  EXPECT_TRUE(a == sample_logged_data(g.env, pi0, 99));
  EXPECT_FALSE(a == sample_logged_data(g.env, pi0, 100));
  for (Index c = 0; c < a.n_companies(); ++c) {
    EXPECT_EQ(a[c].m, a[c].s * a[c].r);
    if (a[c].s == 0) EXPECT_EQ(a[c].r, 0);
    EXPECT_EQ(a[c].logging_prob, pi0(c, a[c].seeker));
  }
}

TEST(SampleLoggedData, MatchRateConvergesToExpectation) {
  Rng rng(2);
  const Environment env(matchope::test_support::random_matrix(rng, 1, 4), matchope::test_support::random_matrix(rng, 1, 4),
                        ContextSet(Matrix::Zero(1, 1), Matrix::Zero(4, 1)));
  const Policy pi0(matchope::test_support::random_stochastic(rng, 1, 4), "pi0");
  double expected = 0.0;
  for (Index j = 0; j < 4; ++j) expected += pi0(0, j) * env.q_m()(0, j);
  const int n = 100000;
  double total = 0.0;
  for (int k = 0; k < n; ++k) total += sample_logged_data(env, pi0, derive_seed(17, k))[0].m;
  EXPECT_LE(std::abs(total / n - expected), 3.0 * std::sqrt(expected * (1 - expected) / n));
}

TEST(SampleLoggedData, FirstStageRateForFixedPair) {
  const Environment env = row_env({0.37, 0.9}, {0.5, 0.5});
  const Matrix p = (Matrix(1, 2) << 1.0, 0.0).finished();
  const Policy pi0(p, "pi0");
  const int n = 100000;
  double total = 0.0;
  for (int k = 0; k < n; ++k) total += sample_logged_data(env, pi0, derive_seed(5, k))[0].s;
  EXPECT_LE(std::abs(total / n - 0.37), 3.0 * std::sqrt(0.37 * 0.63 / n));
}
