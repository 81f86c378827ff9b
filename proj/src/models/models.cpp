#include "matchope/models.hpp"

#include "matchope/errors.hpp"
#include "matchope/numeric.hpp"
#include "matchope/random.hpp"

#include <Eigen/Cholesky>

#include <algorithm>
#include <cmath>
#include <sstream>

namespace matchope {
namespace {

// The intercept is effectively unpenalized; this tiny ridge keeps it finite
// when a training fold has only one label value.
constexpr double kInterceptRidge = 1e-4;
constexpr int kMaxBacktracks = 40;
constexpr std::uint64_t kFoldSalt = 0x6A09E667F3BCC909ULL;

double softplus(double z) { return z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }

Vector penalty_diagonal(Index length, double l2) {
  Vector pen = Vector::Constant(length, l2);
  pen(length - 1) = kInterceptRidge;
  return pen;
}

double clamp_probability(double p, double lo) { return std::clamp(p, lo, 1.0 - lo); }

struct Folds {
  std::vector<std::vector<Index>> members;
  std::vector<std::vector<Index>> complement;
};

Folds make_folds(Index n_companies, int n_folds) {
  Folds folds;
  folds.members.resize(static_cast<std::size_t>(n_folds));
  folds.complement.resize(static_cast<std::size_t>(n_folds));
  for (Index c = 0; c < n_companies; ++c) {
    const int k = fold_of(c, n_folds);
    for (int f = 0; f < n_folds; ++f) {
      (f == k ? folds.members : folds.complement)[static_cast<std::size_t>(f)].push_back(c);
    }
  }
  return folds;
}

class LogisticModel final : public PairProbabilityModel {
 public:
  explicit LogisticModel(Vector theta) : theta_(std::move(theta)) {}

  Matrix predict(const PairFeatureMap& features, std::span<const Index> companies) const override {
    Matrix out = features.scores(theta_, companies);
    out = out.unaryExpr([](double z) { return sigmoid(z); });
    return out;
  }

 private:
  Vector theta_;
};

void check_inputs(const LoggedDataset& dataset, const ContextSet& contexts) {
  if (dataset.n_companies() != contexts.n_companies() || dataset.n_seekers() != contexts.n_seekers()) {
    throw ShapeError("dataset and context set disagree on the number of companies or seekers");
  }
}

enum class Label { s, m, r };

int label_of(const LoggedRecord& rec, Label label) {
  switch (label) {
    case Label::s:
      return rec.s;
    case Label::m:
      return rec.m;
    case Label::r:
      return rec.r;
  }
  return 0;
}

const char* label_name(Label label) {
  switch (label) {
    case Label::s:
      return "q_hat_s";
    case Label::m:
      return "q_hat_m";
    case Label::r:
      return "q_hat_r";
  }
  return "?";
}

bool eligible(const LoggedRecord& rec, Label label) { return label != Label::r || rec.s == 1; }

double global_rate(const LoggedDataset& dataset, Label label, double fallback) {
  double positives = 0.0;
  double count = 0.0;
  for (const auto& rec : dataset.records()) {
    if (!eligible(rec, label)) continue;
    positives += label_of(rec, label);
    count += 1.0;
  }
  return count > 0.0 ? positives / count : fallback;
}

Matrix cross_fit(const LoggedDataset& dataset, const PairFeatureMap& features, const Folds& folds, Label label,
                 const FitConfig& cfg, const BinaryTrainer& trainer, FitDiagnostics* diagnostics) {
  Matrix out(dataset.n_companies(), dataset.n_seekers());
  for (std::size_t k = 0; k < folds.members.size(); ++k) {
    const auto& held_out = folds.members[k];
    if (held_out.empty()) continue;

    std::vector<Index> train;
    for (Index c : folds.complement[k]) {
      if (eligible(dataset[c], label)) train.push_back(c);
    }

    std::unique_ptr<PairProbabilityModel> model;
    if (train.empty()) {
      const double rate = global_rate(dataset, label, cfg.clamp_min);
      if (diagnostics) {
        std::ostringstream msg;
        msg << label_name(label) << ": fold " << k << " has no training records; using global positive rate " << rate;
        diagnostics->warnings.push_back(msg.str());
      }
      model = std::make_unique<ConstantModel>(rate);
    } else {
      Matrix x(static_cast<Index>(train.size()), features.size());
      Vector y(static_cast<Index>(train.size()));
      for (std::size_t i = 0; i < train.size(); ++i) {
        const Index c = train[i];
        features.write_features(c, dataset[c].seeker, x.row(static_cast<Index>(i)));
        y(static_cast<Index>(i)) = label_of(dataset[c], label);
      }
      model = trainer.fit(x, y);
    }

    const Matrix pred = model->predict(features, held_out);
    for (std::size_t i = 0; i < held_out.size(); ++i) out.row(held_out[i]) = pred.row(static_cast<Index>(i));
  }
  return out;
}

}  // namespace

void FitConfig::validate() const {
  if (n_folds < 2) throw ConfigError("n_folds must be at least 2");
  if (!(l2_penalty > 0.0)) throw ConfigError("l2_penalty must be positive");
  if (max_iters < 1) throw ConfigError("max_iters must be at least 1");
  if (!(tolerance > 0.0)) throw ConfigError("tolerance must be positive");
  if (!(clamp_min > 0.0 && clamp_min < 0.5)) throw ConfigError("clamp_min must lie in (0, 0.5)");
  if (!(q_r_shrinkage > 0.0 && q_r_shrinkage <= 1.0)) throw ConfigError("q_r_shrinkage must lie in (0, 1]");
}

int fold_of(Index c, int n_folds) {
  return static_cast<int>(mix64(static_cast<std::uint64_t>(c) ^ kFoldSalt) % static_cast<std::uint64_t>(n_folds));
}

Matrix ConstantModel::predict(const PairFeatureMap& features, std::span<const Index> companies) const {
  return Matrix::Constant(static_cast<Index>(companies.size()), features.n_seekers(), p_);
}

LogisticTrainer::LogisticTrainer(double l2_penalty, int max_iters, double tolerance)
    : l2_penalty_(l2_penalty), max_iters_(max_iters), tolerance_(tolerance) {}

std::unique_ptr<PairProbabilityModel> LogisticTrainer::fit(const Matrix& x, const Vector& y) const {
  return std::make_unique<LogisticModel>(fit_coefficients(x, y));
}

Vector LogisticTrainer::fit_coefficients(const Matrix& x, const Vector& y) const {
  const Index p = x.cols();
  const Vector pen = penalty_diagonal(p, l2_penalty_);
  Vector theta = Vector::Zero(p);
  if (x.rows() == 0) return theta;

  const double mean_y = std::clamp(y.mean(), 1e-3, 1.0 - 1e-3);
  theta(p - 1) = std::log(mean_y / (1.0 - mean_y));

  auto objective = [&](const Vector& t) {
    const Vector z = x * t;
    CompensatedSum loss;
    for (Index i = 0; i < z.size(); ++i) loss.add(softplus(z(i)) - y(i) * z(i));
    return loss.value() + 0.5 * t.dot(pen.cwiseProduct(t));
  };

  double current = objective(theta);
  for (int iter = 0; iter < max_iters_; ++iter) {
    const Vector z = x * theta;
    const Vector prob = z.unaryExpr([](double v) { return sigmoid(v); });
    const Vector grad = x.transpose() * (prob - y) + pen.cwiseProduct(theta);
    const Vector curvature = prob.cwiseProduct((Vector::Ones(prob.size()) - prob));
    Eigen::MatrixXd hessian = x.transpose() * curvature.asDiagonal() * x;
    hessian.diagonal() += pen;
    const Vector step = hessian.ldlt().solve(grad);
    if (!step.allFinite()) throw NumericalError("logistic regression produced a non-finite Newton step");

    const double decrease = grad.dot(step);
    double scale = 1.0;
    Vector candidate = theta - step;
    double next = objective(candidate);
    for (int b = 0; b < kMaxBacktracks && next > current - 1e-4 * scale * decrease; ++b) {
      scale *= 0.5;
      candidate = theta - scale * step;
      next = objective(candidate);
    }
    if (next > current) break;  // no descent available: at the optimum up to rounding
    theta = candidate;
    current = next;
    if ((scale * step).lpNorm<Eigen::Infinity>() < tolerance_) break;
  }
  return theta;
}

RewardModel fit_reward_models(const LoggedDataset& dataset, const ContextSet& contexts, const FitConfig& cfg,
                              FitDiagnostics* diagnostics) {
  cfg.validate();
  const LogisticTrainer trainer(cfg.l2_penalty, cfg.max_iters, cfg.tolerance);
  return fit_reward_models(dataset, contexts, cfg, trainer, diagnostics);
}

RewardModel fit_reward_models(const LoggedDataset& dataset, const ContextSet& contexts, const FitConfig& cfg,
                              const BinaryTrainer& trainer, FitDiagnostics* diagnostics) {
  cfg.validate();
  check_inputs(dataset, contexts);
  const PairFeatureMap features(contexts, cfg.feature_mode);
  const Folds folds = make_folds(dataset.n_companies(), cfg.n_folds);

  auto finish = [&](Matrix m, double scale) {
    return m.unaryExpr([&](double p) { return clamp_probability(scale * p, cfg.clamp_min); }).eval();
  };

  RewardModel model;
  model.q_hat_s = finish(cross_fit(dataset, features, folds, Label::s, cfg, trainer, diagnostics), 1.0);
  model.q_hat_m = finish(cross_fit(dataset, features, folds, Label::m, cfg, trainer, diagnostics), 1.0);
  model.q_hat_r =
      finish(cross_fit(dataset, features, folds, Label::r, cfg, trainer, diagnostics), cfg.q_r_shrinkage);
  return model;
}

Vector fit_choice_model(const PairFeatureMap& features, const LoggedDataset& dataset,
                        std::span<const Index> companies, const FitConfig& cfg) {
  const Index p = features.size();
  const Index n_j = features.n_seekers();
  const Vector pen = penalty_diagonal(p, cfg.l2_penalty);
  Vector theta = Vector::Zero(p);
  if (companies.empty()) return theta;

  auto objective = [&](const Vector& t) {
    const Matrix scores = features.scores(t, companies);
    CompensatedSum loss;
    for (Index i = 0; i < scores.rows(); ++i) {
      const double top = scores.row(i).maxCoeff();
      const double lse = top + std::log((scores.row(i).array() - top).exp().sum());
      loss.add(lse - scores(i, dataset[companies[static_cast<std::size_t>(i)]].seeker));
    }
    return loss.value() + 0.5 * t.dot(pen.cwiseProduct(t));
  };

  Matrix pair_features(n_j, p);
  double current = objective(theta);
  for (int iter = 0; iter < cfg.max_iters; ++iter) {
    const Matrix scores = features.scores(theta, companies);
    Vector grad = pen.cwiseProduct(theta);
    Eigen::MatrixXd hessian = pen.asDiagonal();
    for (Index i = 0; i < scores.rows(); ++i) {
      const Index c = companies[static_cast<std::size_t>(i)];
      const double top = scores.row(i).maxCoeff();
      Vector prob = (scores.row(i).array() - top).exp().transpose();
      prob /= prob.sum();
      for (Index j = 0; j < n_j; ++j) features.write_features(c, j, pair_features.row(j));
      const Vector mean_feature = pair_features.transpose() * prob;
      grad += mean_feature - pair_features.row(dataset[c].seeker).transpose();
      hessian.noalias() += pair_features.transpose() * prob.asDiagonal() * pair_features;
      hessian.noalias() -= mean_feature * mean_feature.transpose();
    }
    const Vector step = hessian.ldlt().solve(grad);
    if (!step.allFinite()) throw NumericalError("choice model produced a non-finite Newton step");

    const double decrease = grad.dot(step);
    double scale = 1.0;
    Vector candidate = theta - step;
    double next = objective(candidate);
    for (int b = 0; b < kMaxBacktracks && next > current - 1e-4 * scale * decrease; ++b) {
      scale *= 0.5;
      candidate = theta - scale * step;
      next = objective(candidate);
    }
    if (next > current) break;
    theta = candidate;
    current = next;
    if ((scale * step).lpNorm<Eigen::Infinity>() < cfg.tolerance) break;
  }
  return theta;
}

Policy fit_logging_policy(const LoggedDataset& dataset, const ContextSet& contexts, const FitConfig& cfg) {
  cfg.validate();
  check_inputs(dataset, contexts);
  const PairFeatureMap features(contexts, cfg.feature_mode);
  const Folds folds = make_folds(dataset.n_companies(), cfg.n_folds);
  const double floor = cfg.clamp_min / static_cast<double>(dataset.n_seekers());

  Matrix probs(dataset.n_companies(), dataset.n_seekers());
  for (std::size_t k = 0; k < folds.members.size(); ++k) {
    const auto& held_out = folds.members[k];
    if (held_out.empty()) continue;
    const Vector theta = fit_choice_model(features, dataset, folds.complement[k], cfg);
    const Matrix scores = features.scores(theta, held_out);
    for (std::size_t i = 0; i < held_out.size(); ++i) {
      const auto row = scores.row(static_cast<Index>(i));
      Eigen::RowVectorXd prob = (row.array() - row.maxCoeff()).exp();
      prob /= prob.sum();
      prob = prob.cwiseMax(floor);
      probs.row(held_out[i]) = prob / prob.sum();
    }
  }
  return Policy(std::move(probs), "logging_estimated");
}

}  // namespace matchope
