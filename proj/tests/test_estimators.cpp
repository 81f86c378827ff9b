#include "matchope/errors.hpp"
#include "matchope/estimators.hpp"
#include "matchope/synth.hpp"
#include "support/instances.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

using namespace matchope;
using matchope::test_support::Instance;
using matchope::test_support::random_instance;

namespace {

Matrix row(std::initializer_list<double> xs) {
  Matrix m(1, static_cast<Index>(xs.size()));
  Index k = 0;
  for (double x : xs) m(0, k++) = x;
  return m;
}

RewardModel with_m(Matrix q_hat_m) {
  RewardModel model;
  model.q_hat_m = std::move(q_hat_m);
  return model;
}

// One company, two seekers; the logged record picks seeker 0.
struct Single {
  Policy pi;
  LoggedDataset data;
};

Single single(double pi_logged, double logging_prob, int s, int r) {
  return {Policy(row({pi_logged, 1.0 - pi_logged}), "pi"), LoggedDataset({{0, s, r, s * r, logging_prob}}, 2)};
}

}  // namespace

TEST(EstimatorNames, RoundTrip) {
  for (EstimatorId id : kAllEstimators) EXPECT_EQ(parse_estimator(to_string(id)), id);
  EXPECT_EQ(parse_estimator("dips"), EstimatorId::dips);
  EXPECT_EQ(parse_estimator("extended_switch_dr"), EstimatorId::extended_switch_dr);
  EXPECT_THROW(parse_estimator("snips"), ConfigError);
  EXPECT_EQ(parse_propensity_source("Estimated"), PropensitySource::estimated);
}

TEST(EstimateDm, Examples) {
  const Policy pi(row({0.3, 0.7}), "pi");
  const LoggedDataset data({{0, 1, 1, 1, 0.5}}, 2);
  const RewardModel model = with_m(row({0.5, 0.1}));
  EXPECT_NEAR(estimate_dm(EstimatorInput(data, pi, model)), 0.22, 1e-15);
  const RewardModel zero = with_m(Matrix::Zero(1, 2));
  EXPECT_EQ(estimate_dm(EstimatorInput(data, pi, zero)), 0.0);
  EXPECT_THROW(estimate_dm(EstimatorInput(data, pi, RewardModel{})), ConfigError);
}

TEST(EstimateDm, OracleModelGivesTrueValue) {
  const auto g = generate_environment({40, 7, 3, 1.0, -0.5, 0.2, 5});
  const Policy pi = epsilon_greedy_target_policy(g.env, 0.2);
  const Policy pi0 = softmax_logging_policy(g.env, -0.5);
  const LoggedDataset data = sample_logged_data(g.env, pi0, 1);
  const RewardModel oracle = oracle_model(g.env);
  EXPECT_EQ(estimate_dm(EstimatorInput(data, pi, oracle)), true_policy_value(g.env, pi));
}

TEST(EstimateIps, Examples) {
  const auto x = single(0.9, 0.5, 1, 1);
  EXPECT_DOUBLE_EQ(estimate_ips(EstimatorInput(x.data, x.pi, RewardModel{})), 1.8);
  // pi = pi0: weights are one and IPS is the sample mean of m.
  const Policy pi0(row({0.5, 0.5}), "pi0");
  const LoggedDataset two({{0, 1, 1, 1, 0.5}}, 2);
  EXPECT_EQ(estimate_ips(EstimatorInput(two, pi0, RewardModel{})), 1.0);
  const LoggedDataset unknown({{0, 1, 1, 1, 0.5}}, 2, false);
  EXPECT_THROW(estimate_ips(EstimatorInput(unknown, pi0, RewardModel{})), PreconditionError);
}

TEST(EstimateDr, Example) {
  // w = 0.75 / 0.375 = 2, m = 1, q_hat_m at the logged pair 0.4, sum_j pi q_hat_m = 0.3.
  const Policy pi(row({0.25, 0.75}), "pi");
  const LoggedDataset data({{1, 1, 1, 1, 0.375}}, 2);
  const RewardModel model = with_m(row({0.0, 0.4}));
  EXPECT_NEAR(estimate_dr(EstimatorInput(data, pi, model)), 1.5, 1e-15);
}

TEST(EstimateDips, Examples) {
  const auto x = single(1.0, 0.5, 1, 0);
  RewardModel model;
  model.q_hat_r = row({0.3, 0.9});
  EXPECT_NEAR(estimate_dips(EstimatorInput(x.data, x.pi, model)), 0.6, 1e-15);
  const auto none = single(1.0, 0.5, 0, 0);
  EXPECT_EQ(estimate_dips(EstimatorInput(none.data, none.pi, model)), 0.0);
  EXPECT_THROW(estimate_dips(EstimatorInput(x.data, x.pi, RewardModel{})), ConfigError);
}

TEST(EstimateDpr, Example) {
  // w = 2, s = 1, q_hat_r = 0.3, q_hat_m(logged) = 0.1, sum_j pi q_hat_m = 0.12.
  const Policy pi(row({0.8, 0.2}), "pi");
  const LoggedDataset data({{0, 1, 0, 0, 0.4}}, 2);
  RewardModel model;
  model.q_hat_r = row({0.3, 0.5});
  model.q_hat_m = row({0.1, 0.2});
  // sum_j pi q_hat_m = 0.08 + 0.04 = 0.12
  EXPECT_NEAR(estimate_dpr(EstimatorInput(data, pi, model)), 0.52, 1e-15);
}

TEST(EstimateSwitchDr, TwoRecordHandExample) {
  Matrix p(2, 2);
  p << 0.9, 0.1, 0.2, 0.8;
  const Policy pi(p, "pi");
  // Weights: 0.9 / 0.3 = 3, 0.8 / 0.5 = 1.6.
  const LoggedDataset data({{0, 1, 1, 1, 0.3}, {1, 1, 0, 0, 0.5}}, 2);
  Matrix qm(2, 2);
  qm << 0.2, 0.1, 0.3, 0.4;
  const RewardModel model = with_m(qm);
  const double dm0 = 0.9 * 0.2 + 0.1 * 0.1;
  const double dm1 = 0.2 * 0.3 + 0.8 * 0.4;
  // lambda = 2 keeps only the second record's correction.
  const double expected = (dm0 + (1.6 * (0 - 0.4) + dm1)) / 2;
  EXPECT_NEAR(estimate_switch_dr(EstimatorInput(data, pi, model), 2.0), expected, 1e-15);
  EXPECT_THROW(estimate_switch_dr(EstimatorInput(data, pi, model), -1.0), ConfigError);
}

TEST(EstimateMips, HandComputedMarginalRatios) {
  // Clusters {0, 1} and {2, 3}.
  const EmbeddingMap emb({0, 0, 1, 1}, 2);
  Matrix pt(3, 4), p0(3, 4);
  pt << 0.1, 0.2, 0.3, 0.4,  //
      0.5, 0.0, 0.25, 0.25,  //
      0.0, 0.0, 0.5, 0.5;
  p0 << 0.25, 0.25, 0.25, 0.25,  //
      0.1, 0.1, 0.4, 0.4,        //
      0.4, 0.2, 0.2, 0.2;
  const Policy pi(pt, "pi"), pi0(p0, "pi0");
  const LoggedDataset data({{1, 1, 1, 1, 0.25}, {3, 1, 0, 0, 0.4}, {2, 1, 1, 1, 0.2}}, 4);
  // Ratios: (0.3 / 0.5), (0.5 / 0.8), (1.0 / 0.4).
  const double expected = (0.3 / 0.5 * 1 + 0.5 / 0.8 * 0 + 1.0 / 0.4 * 1) / 3;
  EXPECT_NEAR(estimate_mips(EstimatorInput(data, pi, RewardModel{}, PropensitySource::logged, &pi0), emb), expected,
              1e-15);
  RewardModel model;
  model.q_hat_r = Matrix::Constant(3, 4, 0.5);
  const double ext = (0.3 / 0.5 * 0.5 + 0.5 / 0.8 * 0.5 + 1.0 / 0.4 * 0.5) / 3;
  EXPECT_NEAR(estimate_extended_mips(EstimatorInput(data, pi, model, PropensitySource::logged, &pi0), emb), ext, 1e-15);
  EXPECT_THROW(estimate_mips(EstimatorInput(data, pi, RewardModel{}), emb), ConfigError);
}

TEST(EstimateMips, SingleClusterIsSampleMean) {
  const Instance x = random_instance(3, 6, 5);
  const LoggedDataset data = sample_logged_data(x.env, x.pi0, 8);
  const EmbeddingMap one = EmbeddingMap::single_cluster(5);
  double mean_m = 0.0, mean_sq = 0.0;
  for (const auto& rec : data.records()) {
    mean_m += rec.m;
    mean_sq += rec.s * (*x.model.q_hat_r)(&rec - data.records().data(), rec.seeker);
  }
  EXPECT_NEAR(estimate_mips(EstimatorInput(data, x.pi, x.model, PropensitySource::logged, &x.pi0), one), mean_m / 6,
              1e-15);
  EXPECT_NEAR(estimate_extended_mips(EstimatorInput(data, x.pi, x.model, PropensitySource::logged, &x.pi0), one),
              mean_sq / 6, 1e-15);
}

TEST(EmbeddingMap, Validation) {
  EXPECT_THROW(EmbeddingMap({0, 0, 2}, 3), ValidationError);
  EXPECT_THROW(EmbeddingMap({0, 3}, 2), ValidationError);
  EXPECT_EQ(default_cluster_count(100), 10);
  EXPECT_EQ(default_cluster_count(5), 1);
  EXPECT_EQ(default_cluster_count(11), 2);
}

TEST(EmbeddingMap, PrincipalDirectionBuckets) {
  // Seekers on a line: the buckets follow the order along it.
  Matrix seekers(6, 2);
  for (Index j = 0; j < 6; ++j) seekers.row(j) << 2.0 * j, 1.0 * j;
  const ContextSet ctx(Matrix::Zero(1, 2), seekers);
  const EmbeddingMap emb = make_embedding_map(ctx, 3);
  EXPECT_EQ(emb.assignment(), (std::vector<Index>{0, 0, 1, 1, 2, 2}));
  EXPECT_THROW(make_embedding_map(ctx, 7), ConfigError);
  Rng rng(2);
  const ContextSet random = matchope::test_support::random_contexts(rng, 1, 37, 4);
  const EmbeddingMap e = make_embedding_map(random, 4);
  std::vector<int> sizes(4, 0);
  for (Index c : e.assignment()) ++sizes[static_cast<std::size_t>(c)];
  for (int s : sizes) EXPECT_GE(s, 9);
}

TEST(Collapses, ExactOnRandomInstances) {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const Instance x = random_instance(seed, 4 + seed % 5, 3 + seed % 4);
    const LoggedDataset data = sample_logged_data(x.env, x.pi0, seed + 100);
    RewardModel zero_m = x.model;
    zero_m.q_hat_m = Matrix::Zero(x.env.n_companies(), x.env.n_seekers());
    const EstimatorInput in(data, x.pi, x.model, PropensitySource::logged, &x.pi0);
    const EstimatorInput in0(data, x.pi, zero_m, PropensitySource::logged, &x.pi0);
    const EmbeddingMap singletons = EmbeddingMap::singletons(x.env.n_seekers());
    const double max_w = estimator_weights(in).maxCoeff();

    EXPECT_EQ(estimate_dr(in0), estimate_ips(in0));
    EXPECT_EQ(estimate_dpr(in0), estimate_dips(in0));
    EXPECT_EQ(estimate_switch_dr(in, max_w), estimate_dr(in));
    EXPECT_EQ(estimate_switch_dr(in, INFINITY), estimate_dr(in));
    EXPECT_EQ(estimate_switch_dr(in, 0.0), estimate_dm(in));
    EXPECT_EQ(estimate_extended_switch_dr(in, max_w), estimate_dpr(in));
    EXPECT_EQ(estimate_extended_switch_dr(in, 0.0), estimate_dm(in));
    EXPECT_EQ(estimate_extended_switch_dr(in0, max_w), estimate_dips(in0));
    EXPECT_EQ(estimate_mips(in, singletons), estimate_ips(in));
    EXPECT_EQ(estimate_extended_mips(in, singletons), estimate_dips(in));
  }
}

TEST(Weights, SupportRules) {
  // Target and logging both zero at the logged action: weight 0, counted.
  Matrix pt(1, 3), p0(1, 3);
  pt << 0.0, 0.5, 0.5;
  p0 << 0.0, 0.5, 0.5;
  const Policy pi(pt, "pi");
  RewardModel model;
  model.pi0_hat = Policy(p0, "pi0_hat");
  const LoggedDataset data({{0, 1, 1, 1, 0.2}}, 3);
  EstimatorDiagnostics diag;
  EstimatorInput in(data, pi, model, PropensitySource::estimated);
  in.diagnostics = &diag;
  EXPECT_EQ(estimate_ips(in), 0.0);
  EXPECT_EQ(diag.zero_support_records, 1);

  Matrix pt2(1, 3);
  pt2 << 0.2, 0.4, 0.4;
  const Policy pi2(pt2, "pi");
  EXPECT_THROW(estimate_ips(EstimatorInput(data, pi2, model, PropensitySource::estimated)), PreconditionError);
}

TEST(Estimators, PermutingCompaniesKeepsEstimates) {
  const Instance x = random_instance(77, 9, 4);
  const LoggedDataset data = sample_logged_data(x.env, x.pi0, 3);
  std::vector<Index> perm(9);
  for (Index c = 0; c < 9; ++c) perm[static_cast<std::size_t>(c)] = (c * 4 + 2) % 9;
  auto permute = [&](const Matrix& m) {
    Matrix out(m.rows(), m.cols());
    for (Index c = 0; c < 9; ++c) out.row(c) = m.row(perm[static_cast<std::size_t>(c)]);
    return out;
  };
  std::vector<LoggedRecord> records;
  for (Index c = 0; c < 9; ++c) records.push_back(data[perm[static_cast<std::size_t>(c)]]);
  const LoggedDataset pdata(records, 4);
  const Policy ppi(permute(x.pi.probs()), "pi"), ppi0(permute(x.pi0.probs()), "pi0");
  RewardModel pmodel;
  pmodel.q_hat_r = permute(*x.model.q_hat_r);
  pmodel.q_hat_m = permute(*x.model.q_hat_m);
  const EmbeddingMap emb({0, 1, 1, 0}, 2);
  const EstimatorOptions opts{1.5, &emb};
  for (EstimatorId id : kAllEstimators) {
    const double a = estimate(id, EstimatorInput(data, x.pi, x.model, PropensitySource::logged, &x.pi0), opts);
    const double b = estimate(id, EstimatorInput(pdata, ppi, pmodel, PropensitySource::logged, &ppi0), opts);
    EXPECT_NEAR(a, b, 1e-15 * std::max(1.0, std::abs(a))) << to_string(id);
  }
}

TEST(Estimators, EstimateManyMatchesSingleCalls) {
  const Instance x = random_instance(12, 7, 5);
  const LoggedDataset data = sample_logged_data(x.env, x.pi0, 1);
  const EmbeddingMap emb = EmbeddingMap::singletons(5);
  const EstimatorOptions opts{2.0, &emb};
  const EstimatorInput in(data, x.pi, x.model, PropensitySource::logged, &x.pi0);
  const std::vector<EstimatorId> ids(std::begin(kAllEstimators), std::end(kAllEstimators));
  const auto many = estimate_many(ids, in, opts);
  for (std::size_t k = 0; k < ids.size(); ++k) EXPECT_EQ(many[k], estimate(ids[k], in, opts));
}

TEST(Estimators, MonteCarloUnbiasedWithLoggedPropensities) {
  // Smaller replication count than the acceptance run; same 3-SE contract.
  const Instance x = random_instance(5, 20, 6);
  RewardModel oracle = oracle_model(x.env);
  const double truth = true_policy_value(x.env, x.pi);
  const EstimatorId ids[] = {EstimatorId::ips, EstimatorId::dr, EstimatorId::dips, EstimatorId::dpr};
  RewardModel model = x.model;
  model.q_hat_r = oracle.q_hat_r;
  const int n = 20000;
  std::vector<std::vector<double>> values(4);
  for (int k = 0; k < n; ++k) {
    const LoggedDataset data = sample_logged_data(x.env, x.pi0, derive_seed(1, k));
    const auto est = estimate_many(ids, EstimatorInput(data, x.pi, model));
    for (int e = 0; e < 4; ++e) values[e].push_back(est[e]);
  }
  for (int e = 0; e < 4; ++e) {
    double mean = 0, sq = 0;
    for (double v : values[e]) mean += v;
    mean /= n;
    for (double v : values[e]) sq += (v - mean) * (v - mean);
    const double se = std::sqrt(sq / (n - 1) / n);
    EXPECT_LE(std::abs(mean - truth), 3.0 * se) << to_string(ids[e]);
  }
}
