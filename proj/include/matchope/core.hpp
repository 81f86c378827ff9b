#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace matchope {

using Index = Eigen::Index;
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

inline constexpr double kRowSumTolerance = 1e-9;

/// Company and job-seeker feature vectors (one row per unit).
class ContextSet {
 public:
  ContextSet(Matrix company_contexts, Matrix seeker_contexts);

  const Matrix& company() const { return company_; }
  const Matrix& seeker() const { return seeker_; }
  Index n_companies() const { return company_.rows(); }
  Index n_seekers() const { return seeker_.rows(); }
  Index dim() const { return company_.cols(); }

 private:
  Matrix company_;
  Matrix seeker_;
};

/// Ground-truth first- and second-stage reward surfaces. The match surface
/// q_m = q_s * q_r is materialized at construction.
class Environment {
 public:
  Environment(Matrix q_s, Matrix q_r, ContextSet contexts);

  const Matrix& q_s() const { return q_s_; }
  const Matrix& q_r() const { return q_r_; }
  const Matrix& q_m() const { return q_m_; }
  const ContextSet& contexts() const { return contexts_; }
  Index n_companies() const { return q_s_.rows(); }
  Index n_seekers() const { return q_s_.cols(); }

  double sigma2_s(Index c, Index j) const { return q_s_(c, j) * (1.0 - q_s_(c, j)); }
  double sigma2_r(Index c, Index j) const { return q_r_(c, j) * (1.0 - q_r_(c, j)); }
  double sigma2_m(Index c, Index j) const { return q_m_(c, j) * (1.0 - q_m_(c, j)); }

 private:
  Matrix q_s_;
  Matrix q_r_;
  Matrix q_m_;
  ContextSet contexts_;
};

/// Row-stochastic recommendation policy: probs(c, j) = pi(j | c).
class Policy {
 public:
  Policy(Matrix probs, std::string label);

  static Policy uniform(Index n_companies, Index n_seekers, std::string label = "uniform");

  const Matrix& probs() const { return probs_; }
  double operator()(Index c, Index j) const { return probs_(c, j); }
  const std::string& label() const { return label_; }
  Index n_companies() const { return probs_.rows(); }
  Index n_seekers() const { return probs_.cols(); }

 private:
  Matrix probs_;
  std::string label_;
};

struct LoggedRecord {
  Index seeker = 0;
  int s = 0;
  int r = 0;
  int m = 0;
  double logging_prob = 1.0;

  friend bool operator==(const LoggedRecord&, const LoggedRecord&) = default;
};

/// One record per company; the record's position is the company index.
/// r is stored as 0 whenever s is 0.
class LoggedDataset {
 public:
  LoggedDataset(std::vector<LoggedRecord> records, Index n_seekers, bool propensities_known = true);

  const std::vector<LoggedRecord>& records() const { return records_; }
  const LoggedRecord& operator[](Index c) const { return records_[static_cast<std::size_t>(c)]; }
  Index n_companies() const { return static_cast<Index>(records_.size()); }
  Index n_seekers() const { return n_seekers_; }
  bool propensities_known() const { return propensities_known_; }

  friend bool operator==(const LoggedDataset&, const LoggedDataset&) = default;

 private:
  std::vector<LoggedRecord> records_;
  Index n_seekers_;
  bool propensities_known_;
};

/// Fitted (or oracle) reward surfaces and optionally an estimated logging
/// policy. Estimators check for the fields they need.
struct RewardModel {
  std::optional<Matrix> q_hat_r;
  std::optional<Matrix> q_hat_m;
  std::optional<Matrix> q_hat_s;
  std::optional<Policy> pi0_hat;

  /// Throws if any present field has the wrong shape or leaves [0, 1].
  void validate(Index n_companies, Index n_seekers) const;
};

/// The model that knows the environment exactly.
RewardModel oracle_model(const Environment& env);

/// Average expected matches per company under `pi`.
double true_policy_value(const Environment& env, const Policy& pi);

/// pi(j_c | c) / pi0(j_c | c) for every logged record.
Vector importance_weights(const Policy& pi, const LoggedDataset& dataset);

void require_same_shape(const Policy& pi, Index n_companies, Index n_seekers, const char* what);

}  // namespace matchope
