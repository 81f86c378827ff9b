#pragma once

#include "matchope/core.hpp"
#include "matchope/features.hpp"

#include <memory>
#include <span>
#include <string>
#include <vector>

namespace matchope {

struct FitConfig {
  int n_folds = 5;
  /// Ridge strength on every coefficient except the intercept.
  double l2_penalty = 1.0;
  /// Newton iteration cap.
  int max_iters = 500;
  double tolerance = 1e-8;
  FeatureMode feature_mode = FeatureMode::concat_plus_product;
  /// Predictions are clamped to [clamp_min, 1 - clamp_min].
  double clamp_min = 1e-4;
  /// Post-hoc shrinkage q_hat_r <- gamma * q_hat_r, gamma in (0, 1].
  double q_r_shrinkage = 1.0;

  void validate() const;
};

/// Fold of company c. Derived from a hash of the index only.
int fold_of(Index c, int n_folds);

/// Predicts a probability for every seeker of the requested companies.
class PairProbabilityModel {
 public:
  virtual ~PairProbabilityModel() = default;
  virtual Matrix predict(const PairFeatureMap& features, std::span<const Index> companies) const = 0;
};

/// Binary-outcome learner over pair features. Alternative learners (e.g.
/// boosted trees) plug in here.
class BinaryTrainer {
 public:
  virtual ~BinaryTrainer() = default;
  /// `x` holds one feature row per training example.
  virtual std::unique_ptr<PairProbabilityModel> fit(const Matrix& x, const Vector& y) const = 0;
};

/// Ridge-penalized logistic regression solved by damped Newton iterations.
class LogisticTrainer final : public BinaryTrainer {
 public:
  LogisticTrainer(double l2_penalty, int max_iters, double tolerance);

  std::unique_ptr<PairProbabilityModel> fit(const Matrix& x, const Vector& y) const override;

  /// The fitted coefficient vector (last entry is the intercept).
  Vector fit_coefficients(const Matrix& x, const Vector& y) const;

 private:
  double l2_penalty_;
  int max_iters_;
  double tolerance_;
};

/// Always predicts the same probability.
class ConstantModel final : public PairProbabilityModel {
 public:
  explicit ConstantModel(double p) : p_(p) {}
  Matrix predict(const PairFeatureMap& features, std::span<const Index> companies) const override;

 private:
  double p_;
};

struct FitDiagnostics {
  std::vector<std::string> warnings;
};

/// Cross-fitted q_hat_s, q_hat_m (all records) and q_hat_r (records with s = 1).
/// A company's row always comes from a model trained on the other folds.
RewardModel fit_reward_models(const LoggedDataset& dataset, const ContextSet& contexts, const FitConfig& cfg,
                              FitDiagnostics* diagnostics = nullptr);

/// Same, with a caller-supplied learner.
RewardModel fit_reward_models(const LoggedDataset& dataset, const ContextSet& contexts, const FitConfig& cfg,
                              const BinaryTrainer& trainer, FitDiagnostics* diagnostics = nullptr);

/// Cross-fitted multinomial logit over seekers, pi0_hat(j|c) proportional to
/// exp(theta' f(c, j)). Rows are floored at clamp_min / |J| and renormalized.
Policy fit_logging_policy(const LoggedDataset& dataset, const ContextSet& contexts, const FitConfig& cfg);

/// Maximum-likelihood multinomial-logit coefficients from the listed
/// companies' logged choices.
Vector fit_choice_model(const PairFeatureMap& features, const LoggedDataset& dataset,
                        std::span<const Index> companies, const FitConfig& cfg);

}  // namespace matchope
