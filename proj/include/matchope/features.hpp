#pragma once

#include "matchope/core.hpp"

#include <span>
#include <string>
#include <string_view>

namespace matchope {

/// Pair feature layouts. Every layout ends with a constant-1 intercept.
///   concat:              [x_c, x_j, 1]
///   concat_plus_product: [x_c, x_j, x_c * x_j, 1]   (elementwise product)
enum class FeatureMode { concat, concat_plus_product };

std::string to_string(FeatureMode mode);
FeatureMode parse_feature_mode(std::string_view text);

Index pair_feature_length(Index dim, FeatureMode mode);

/// Features for the pair (c, j).
Vector build_pair_features(const ContextSet& contexts, Index c, Index j, FeatureMode mode);

/// Structured access to pair features for a whole context set. Linear scores
/// and feature-weighted sums are computed without materializing the
/// |C| x |J| x p feature tensor.
class PairFeatureMap {
 public:
  PairFeatureMap(const ContextSet& contexts, FeatureMode mode);

  Index size() const { return length_; }
  Index n_companies() const { return contexts_->n_companies(); }
  Index n_seekers() const { return contexts_->n_seekers(); }
  FeatureMode mode() const { return mode_; }
  const ContextSet& contexts() const { return *contexts_; }

  Vector features(Index c, Index j) const;
  void write_features(Index c, Index j, Eigen::Ref<Eigen::RowVectorXd> out) const;

  /// theta' f(c, j) for all pairs.
  Matrix scores(const Vector& theta) const;

  /// theta' f(c, j) for the listed companies (rows follow `companies`).
  Matrix scores(const Vector& theta, std::span<const Index> companies) const;

  /// Row c of the result is sum_j weights(c, j) f(c, j).
  Matrix weighted_sums(const Matrix& weights) const;

 private:
  const ContextSet* contexts_;
  FeatureMode mode_;
  Index length_;
};

}  // namespace matchope
