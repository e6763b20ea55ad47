// Hermetic analytical-identity suite: the gradient-ratio identity between CE
// and the expected policy gradient, estimator equivalence and variance
// behavior, finite-difference checks for the whole loss zoo, the label-noise
// affine identity and ranking preservation, the KL/entropy affine identity,
// annealing endpoint values, and the sequence metric formulas. Runs on fixed
// seeds, touches no files and no network.
#pragma once

#include <string>
#include <vector>

namespace epgrad {

struct VerifyOptions {
  // Test-only mutation hook: flips the sign of the EPG gradient inside the
  // ratio check so the suite can prove it would catch that bug.
  bool inject_epg_sign_error = false;
};

struct CheckResult {
  std::string name;
  bool pass = false;
  double max_deviation = 0.0;
  std::string detail;
};

std::vector<CheckResult> run_identity_suite(const VerifyOptions& opts = {});

}  // namespace epgrad
