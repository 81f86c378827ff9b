#include "matchope/core.hpp"

#include "matchope/errors.hpp"
#include "matchope/numeric.hpp"

#include <cmath>
#include <sstream>

namespace matchope {
namespace {

bool all_finite(const Matrix& m) { return m.allFinite(); }

void require_unit_interval(const Matrix& m, const char* what) {
  for (Index c = 0; c < m.rows(); ++c) {
    for (Index j = 0; j < m.cols(); ++j) {
      const double v = m(c, j);
      if (!(v >= 0.0 && v <= 1.0)) {
        std::ostringstream msg;
        msg << what << "(" << c << ", " << j << ") = " << v << " is outside [0, 1]";
        throw ValidationError(msg.str());
      }
    }
  }
}

}  // namespace

ContextSet::ContextSet(Matrix company_contexts, Matrix seeker_contexts)
    : company_(std::move(company_contexts)), seeker_(std::move(seeker_contexts)) {
  if (company_.cols() < 1) throw ValidationError("context dimension must be at least 1");
  if (company_.cols() != seeker_.cols()) {
    throw ShapeError("company and seeker contexts have different dimensions");
  }
  if (company_.rows() < 1) throw ValidationError("at least one company is required");
  if (seeker_.rows() < 2) throw ValidationError("at least two job seekers are required");
  if (!all_finite(company_) || !all_finite(seeker_)) {
    throw ValidationError("contexts contain non-finite entries");
  }
}

Environment::Environment(Matrix q_s, Matrix q_r, ContextSet contexts)
    : q_s_(std::move(q_s)), q_r_(std::move(q_r)), contexts_(std::move(contexts)) {
  if (q_s_.rows() != q_r_.rows() || q_s_.cols() != q_r_.cols()) {
    throw ShapeError("q_s and q_r shapes differ");
  }
  if (q_s_.rows() != contexts_.n_companies() || q_s_.cols() != contexts_.n_seekers()) {
    throw ShapeError("reward surfaces do not match the context set");
  }
  require_unit_interval(q_s_, "q_s");
  require_unit_interval(q_r_, "q_r");
  q_m_ = q_s_.cwiseProduct(q_r_);
  require_unit_interval(q_m_, "q_m");
}

Policy::Policy(Matrix probs, std::string label) : probs_(std::move(probs)), label_(std::move(label)) {
  if (probs_.rows() < 1 || probs_.cols() < 1) throw ShapeError("policy must have at least one row and column");
  for (Index c = 0; c < probs_.rows(); ++c) {
    CompensatedSum total;
    for (Index j = 0; j < probs_.cols(); ++j) {
      const double p = probs_(c, j);
      if (!(p >= 0.0) || !std::isfinite(p)) {
        std::ostringstream msg;
        msg << "policy '" << label_ << "' has invalid probability " << p << " at (" << c << ", " << j << ")";
        throw ValidationError(msg.str());
      }
      total.add(p);
    }
    if (std::abs(total.value() - 1.0) > kRowSumTolerance) {
      std::ostringstream msg;
      msg.precision(17);
      msg << "policy '" << label_ << "' row " << c << " sums to " << total.value();
      throw ValidationError(msg.str());
    }
  }
}

Policy Policy::uniform(Index n_companies, Index n_seekers, std::string label) {
  return Policy(Matrix::Constant(n_companies, n_seekers, 1.0 / static_cast<double>(n_seekers)), std::move(label));
}

LoggedDataset::LoggedDataset(std::vector<LoggedRecord> records, Index n_seekers, bool propensities_known)
    : records_(std::move(records)), n_seekers_(n_seekers), propensities_known_(propensities_known) {
  if (records_.empty()) throw ValidationError("dataset has no records");
  if (n_seekers_ < 2) throw ValidationError("at least two job seekers are required");
  for (std::size_t c = 0; c < records_.size(); ++c) {
    const auto& rec = records_[c];
    std::ostringstream where;
    where << "record for company " << c;
    if (rec.seeker < 0 || rec.seeker >= n_seekers_) {
      throw ValidationError(where.str() + ": seeker index out of range");
    }
    if ((rec.s != 0 && rec.s != 1) || (rec.r != 0 && rec.r != 1)) {
      throw ValidationError(where.str() + ": rewards must be 0 or 1");
    }
    if (rec.s == 0 && rec.r != 0) {
      throw ValidationError(where.str() + ": r = 1 with s = 0 violates m = s * r");
    }
    if (rec.m != rec.s * rec.r) throw ValidationError(where.str() + ": m != s * r");
    if (propensities_known_ && !(rec.logging_prob > 0.0 && rec.logging_prob <= 1.0)) {
      throw ValidationError(where.str() + ": logging propensity must lie in (0, 1]");
    }
  }
}

void RewardModel::validate(Index n_companies, Index n_seekers) const {
  auto check = [&](const std::optional<Matrix>& m, const char* what) {
    if (!m) return;
    if (m->rows() != n_companies || m->cols() != n_seekers) {
      throw ShapeError(std::string(what) + " has the wrong shape");
    }
    require_unit_interval(*m, what);
  };
  check(q_hat_r, "q_hat_r");
  check(q_hat_m, "q_hat_m");
  check(q_hat_s, "q_hat_s");
  if (pi0_hat) require_same_shape(*pi0_hat, n_companies, n_seekers, "pi0_hat");
}

RewardModel oracle_model(const Environment& env) {
  RewardModel model;
  model.q_hat_r = env.q_r();
  model.q_hat_m = env.q_m();
  model.q_hat_s = env.q_s();
  return model;
}

void require_same_shape(const Policy& pi, Index n_companies, Index n_seekers, const char* what) {
  if (pi.n_companies() != n_companies || pi.n_seekers() != n_seekers) {
    std::ostringstream msg;
    msg << what << " is " << pi.n_companies() << "x" << pi.n_seekers() << ", expected " << n_companies << "x"
        << n_seekers;
    throw ShapeError(msg.str());
  }
}

double true_policy_value(const Environment& env, const Policy& pi) {
  require_same_shape(pi, env.n_companies(), env.n_seekers(), "policy");
  CompensatedSum total;
  for (Index c = 0; c < env.n_companies(); ++c) {
    CompensatedSum row;
    for (Index j = 0; j < env.n_seekers(); ++j) row.add(pi(c, j) * env.q_m()(c, j));
    total.add(row.value());
  }
  return total.value() / static_cast<double>(env.n_companies());
}

Vector importance_weights(const Policy& pi, const LoggedDataset& dataset) {
  if (pi.n_companies() != dataset.n_companies() || pi.n_seekers() != dataset.n_seekers()) {
    throw ShapeError("policy does not match the dataset");
  }
  if (!dataset.propensities_known()) {
    throw PreconditionError("dataset has no logged propensities");
  }
  Vector w(dataset.n_companies());
  for (Index c = 0; c < dataset.n_companies(); ++c) {
    const auto& rec = dataset[c];
    if (!(rec.logging_prob > 0.0)) {
      throw PreconditionError("zero logging propensity violates common support");
    }
    w(c) = pi(c, rec.seeker) / rec.logging_prob;
  }
  return w;
}

}  // namespace matchope
