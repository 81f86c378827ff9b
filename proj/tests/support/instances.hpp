#pragma once

#include "matchope/core.hpp"
#include "matchope/estimators.hpp"
#include "matchope/numeric.hpp"
#include "matchope/random.hpp"

#include <cmath>
#include <functional>
#include <vector>

namespace matchope::test_support {

struct Instance {
  Environment env;
  Policy pi;
  Policy pi0;
  RewardModel model;
};

inline Matrix random_matrix(Rng& rng, Index rows, Index cols, double lo = 0.0, double hi = 1.0) {
  Matrix m(rows, cols);
  for (Index i = 0; i < rows; ++i) {
    for (Index j = 0; j < cols; ++j) m(i, j) = rng.uniform(lo, hi);
  }
  return m;
}

inline Matrix random_normal(Rng& rng, Index rows, Index cols) {
  Matrix m(rows, cols);
  for (Index i = 0; i < rows; ++i) {
    for (Index j = 0; j < cols; ++j) m(i, j) = rng.normal();
  }
  return m;
}

/// Random row-stochastic matrix; with `sparse`, roughly a third of the
/// entries are zeroed (every row keeps at least one positive entry).
inline Matrix random_stochastic(Rng& rng, Index rows, Index cols, bool sparse = false) {
  Matrix m = random_matrix(rng, rows, cols, 0.05, 1.0);
  for (Index i = 0; i < rows; ++i) {
    if (sparse) {
      for (Index j = 0; j < cols; ++j) {
        if (rng.uniform() < 0.33) m(i, j) = 0.0;
      }
      if (m.row(i).sum() == 0.0) m(i, static_cast<Index>(rng.uniform() * static_cast<double>(cols))) = 1.0;
    }
    m.row(i) /= m.row(i).sum();
  }
  return m;
}

inline ContextSet random_contexts(Rng& rng, Index n_c, Index n_j, Index dim = 2) {
  return ContextSet(random_normal(rng, n_c, dim), random_normal(rng, n_j, dim));
}

/// Random environment, policies with full logging support, and an arbitrary
/// (non-oracle) reward model including q_hat_s.
inline Instance random_instance(std::uint64_t seed, Index n_c, Index n_j, bool sparse_target = false) {
  Rng rng(seed);
  Matrix q_s = random_matrix(rng, n_c, n_j);
  Matrix q_r = random_matrix(rng, n_c, n_j);
  // A few exact zeros and ones exercise the degenerate branches.
  if (n_c * n_j >= 4) {
    q_s(0, 0) = 1.0;
    q_r(n_c - 1, n_j - 1) = 0.0;
  }
  Environment env(q_s, q_r, random_contexts(rng, n_c, n_j));
  Policy pi(random_stochastic(rng, n_c, n_j, sparse_target), "pi");
  Policy pi0(random_stochastic(rng, n_c, n_j), "pi0");
  RewardModel model;
  model.q_hat_r = random_matrix(rng, n_c, n_j);
  model.q_hat_m = random_matrix(rng, n_c, n_j);
  model.q_hat_s = random_matrix(rng, n_c, n_j);
  return Instance{std::move(env), std::move(pi), std::move(pi0), std::move(model)};
}

struct JointMoments {
  double mean = 0.0;
  double variance = 0.0;
};

/// Moments of `statistic` over the joint distribution of whole datasets,
/// enumerated outcome by outcome across every company at once.
inline JointMoments enumerate_joint(const Environment& env, const Policy& pi0,
                                    const std::function<double(const LoggedDataset&)>& statistic) {
  struct Outcome {
    Index j;
    int s, r;
    double p;
  };
  std::vector<std::vector<Outcome>> per_company(static_cast<std::size_t>(env.n_companies()));
  for (Index c = 0; c < env.n_companies(); ++c) {
    for (Index j = 0; j < env.n_seekers(); ++j) {
      const double p0 = pi0(c, j);
      const double qs = env.q_s()(c, j);
      const double qr = env.q_r()(c, j);
      const Outcome outs[] = {{j, 0, 0, p0 * (1 - qs)}, {j, 1, 0, p0 * qs * (1 - qr)}, {j, 1, 1, p0 * qs * qr}};
      for (const auto& o : outs) {
        if (o.p > 0.0) per_company[static_cast<std::size_t>(c)].push_back(o);
      }
    }
  }
  std::vector<double> probs;
  std::vector<double> values;
  std::vector<LoggedRecord> records(static_cast<std::size_t>(env.n_companies()));
  std::function<void(std::size_t, double)> walk = [&](std::size_t c, double p) {
    if (c == records.size()) {
      probs.push_back(p);
      values.push_back(statistic(LoggedDataset(records, env.n_seekers())));
      return;
    }
    for (const auto& o : per_company[c]) {
      records[c] = LoggedRecord{o.j, o.s, o.r, o.s * o.r, pi0(static_cast<Index>(c), o.j)};
      walk(c + 1, p * o.p);
    }
  };
  walk(0, 1.0);
  CompensatedSum mean;
  for (std::size_t k = 0; k < values.size(); ++k) mean.add(probs[k] * values[k]);
  CompensatedSum var;
  for (std::size_t k = 0; k < values.size(); ++k) {
    const double d = values[k] - mean.value();
    var.add(probs[k] * d * d);
  }
  return {mean.value(), var.value()};
}

}  // namespace matchope::test_support
