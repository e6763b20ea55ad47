// One-step classification MDP semantics: 0/1 reward, misclassification rate,
// the expected-reward objective, its closed form under symmetric label noise,
// and entropy measurement. These double as executable oracles for the
// ranking-preservation and KL identities used by the verification suite.
#pragma once

#include <optional>
#include <vector>

#include "epgrad/rng.hpp"
#include "epgrad/types.hpp"

namespace epgrad {

// 1 when the action matches the label, 0 otherwise.
inline double reward(int label, int action) {
  return action == label ? 1.0 : 0.0;
}

// Symmetric label-noise channel: keep the label w.p. 1-eta, otherwise flip
// uniformly to one of the other K-1 classes.
struct NoiseChannel {
  double eta = 0.0;
  int num_classes = 2;
};

// Fraction of mismatches between predictions and labels. Throws on empty
// input or length mismatch.
double zero_one_loss(const std::vector<int>& predictions,
                     const std::vector<int>& labels);

// Rowwise argmax with ties broken by the lowest class index.
std::vector<int> argmax_rows(const ConstMatRef& logits);

// J = (1/N) sum_i p_i(y_i), the expected 0/1 reward of the stochastic policy
// with the empirical state distribution. Throws if a row is off the simplex
// by more than 1e-9.
double rl_objective(const ConstMatRef& probs, const std::vector<int>& labels);

// Exact expectation of rl_objective over the noise channel, per sample:
// (1-eta) p(y_i) + eta/(K-1) (1 - p(y_i)). Throws if K < 2.
double noisy_objective_exact(const ConstMatRef& probs,
                             const std::vector<int>& labels, double eta);

// Whether the clean and noisy objectives rank two policies identically
// (or both differences vanish). Requires eta < 1 - 1/K.
bool prop2_rank_check(const ConstMatRef& probs_a, const ConstMatRef& probs_b,
                      const std::vector<int>& labels, double eta);

struct KlIdentity {
  double lhs = 0.0;  // -KL(p || q_eta) - H(p)
  double rhs = 0.0;  // A * p(y*) + B
  double diff = 0.0;
};

// The affine form behind the entropy-reduction claim, with
// A = log(1-eta) - log(eta/(K-1)) and B = log(eta/(K-1)). Requires
// eta in (0,1) and a strictly positive p (KL is undefined otherwise).
KlIdentity prop3_identity(const Vec& p, int true_class, double eta);

// (1/N) sum_i H(p_i), natural log.
double mean_entropy(const ConstMatRef& probs);

// Independently flips each label through the channel.
std::vector<int> apply_noise(const std::vector<int>& labels,
                             const NoiseChannel& channel, Rng& rng);

}  // namespace epgrad
