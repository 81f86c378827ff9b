#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace matchope::harness {

struct VerificationConfig {
  std::int64_t n_companies = 20;
  std::int64_t n_seekers = 5;
  std::int64_t n_reps = 20000;
  std::uint64_t seed = 0;
  unsigned jobs = 1;

  void validate() const;
};

struct VerificationCheck {
  std::string name;
  bool passed = false;
  std::string detail;
};

struct VerificationResult {
  std::vector<VerificationCheck> checks;

  bool passed() const;
};

/// Closed-form moments against exhaustive enumeration and Monte Carlo on a
/// small synthetic instance, plus the estimator collapse identities.
VerificationResult run_verification_suite(const VerificationConfig& cfg);

}  // namespace matchope::harness
