#include "matchope/features.hpp"

#include "matchope/errors.hpp"

namespace matchope {

std::string to_string(FeatureMode mode) {
  switch (mode) {
    case FeatureMode::concat:
      return "concat";
    case FeatureMode::concat_plus_product:
      return "concat_plus_product";
  }
  return "unknown";
}

FeatureMode parse_feature_mode(std::string_view text) {
  if (text == "concat") return FeatureMode::concat;
  if (text == "concat_plus_product") return FeatureMode::concat_plus_product;
  throw ConfigError("unknown feature mode '" + std::string(text) + "'");
}

Index pair_feature_length(Index dim, FeatureMode mode) {
  return (mode == FeatureMode::concat ? 2 * dim : 3 * dim) + 1;
}

Vector build_pair_features(const ContextSet& contexts, Index c, Index j, FeatureMode mode) {
  return PairFeatureMap(contexts, mode).features(c, j);
}

PairFeatureMap::PairFeatureMap(const ContextSet& contexts, FeatureMode mode)
    : contexts_(&contexts), mode_(mode), length_(pair_feature_length(contexts.dim(), mode)) {}

Vector PairFeatureMap::features(Index c, Index j) const {
  Eigen::RowVectorXd row(length_);
  write_features(c, j, row);
  return row.transpose();
}

void PairFeatureMap::write_features(Index c, Index j, Eigen::Ref<Eigen::RowVectorXd> out) const {
  if (c < 0 || c >= n_companies() || j < 0 || j >= n_seekers()) {
    throw PreconditionError("pair index out of range");
  }
  const Index d = contexts_->dim();
  const auto xc = contexts_->company().row(c);
  const auto xj = contexts_->seeker().row(j);
  out.segment(0, d) = xc;
  out.segment(d, d) = xj;
  if (mode_ == FeatureMode::concat_plus_product) out.segment(2 * d, d) = xc.cwiseProduct(xj);
  out(length_ - 1) = 1.0;
}

Matrix PairFeatureMap::scores(const Vector& theta) const {
  std::vector<Index> all(static_cast<std::size_t>(n_companies()));
  for (Index c = 0; c < n_companies(); ++c) all[static_cast<std::size_t>(c)] = c;
  return scores(theta, all);
}

Matrix PairFeatureMap::scores(const Vector& theta, std::span<const Index> companies) const {
  if (theta.size() != length_) throw ShapeError("parameter length does not match the feature length");
  const Index d = contexts_->dim();
  const auto theta_c = theta.segment(0, d);
  const auto theta_j = theta.segment(d, d);
  const double intercept = theta(length_ - 1);

  // theta' f(c, j) = theta_c' x_c + intercept + x_j' (theta_j + theta_p * x_c)
  const auto n = static_cast<Index>(companies.size());
  Matrix seeker_weights(n, d);
  Vector offset(n);
  for (Index i = 0; i < n; ++i) {
    const Index c = companies[static_cast<std::size_t>(i)];
    const auto xc = contexts_->company().row(c);
    offset(i) = xc.dot(theta_c) + intercept;
    if (mode_ == FeatureMode::concat_plus_product) {
      seeker_weights.row(i) = theta_j.transpose() + theta.segment(2 * d, d).transpose().cwiseProduct(xc);
    } else {
      seeker_weights.row(i) = theta_j.transpose();
    }
  }
  Matrix out = seeker_weights * contexts_->seeker().transpose();
  out.colwise() += offset;
  return out;
}

Matrix PairFeatureMap::weighted_sums(const Matrix& weights) const {
  if (weights.rows() != n_companies() || weights.cols() != n_seekers()) {
    throw ShapeError("weight matrix does not match the pair grid");
  }
  const Index d = contexts_->dim();
  const Vector totals = weights.rowwise().sum();
  const Matrix seeker_part = weights * contexts_->seeker();
  Matrix out(n_companies(), length_);
  out.leftCols(d) = contexts_->company().array().colwise() * totals.array();
  out.middleCols(d, d) = seeker_part;
  if (mode_ == FeatureMode::concat_plus_product) {
    out.middleCols(2 * d, d) = seeker_part.cwiseProduct(contexts_->company());
  }
  out.col(length_ - 1) = totals;
  return out;
}

}  // namespace matchope
