// The loss zoo. Every loss maps a logits batch and integer labels to a scalar
// loss plus the analytic gradient w.r.t. the logits, and separately to a tape
// expression so the same quantity can be differentiated end to end. Keeping
// the analytic route independent of the tape lets the gradient-ratio identity
// between CE and the expected policy gradient be checked without trusting
// autodiff.
//
// Conventions: losses average over the batch (1/N); probabilities are the
// softmax of the logits; the expected-policy-gradient (EPG) loss is
// -(1/N) sum_i p(y_i | x_i), whose negative gradient is the exact
// expectation of the REINFORCE estimator over actions.
#pragma once

#include <optional>
#include <string>
#include <vector>

#include "epgrad/autodiff.hpp"
#include "epgrad/rng.hpp"
#include "epgrad/types.hpp"

namespace epgrad {

enum class LossKind {
  CrossEntropy,
  Epg,
  AdaptiveEpg,
  Reinforce,
  Focal,
  LabelSmooth,
  ConfidencePenalty,
  EntropyPenalty,
};

LossKind loss_kind_from_string(const std::string& s);
std::string to_string(LossKind k);

struct LossSpec {
  LossKind kind = LossKind::CrossEntropy;
  double gamma = 1.0;         // focal exponent / label-smoothing mass
  double beta = 0.1;          // penalty weight (CP default 0.1, EP default 1)
  int reinforce_samples = 1;  // action draws per input
};

struct LossOutput {
  double loss = 0.0;
  Mat grad;  // dL/dlogits, same shape as the logits batch
};

LossOutput ce_loss(const ConstMatRef& logits, const std::vector<int>& labels);
LossOutput epg_loss(const ConstMatRef& logits, const std::vector<int>& labels);
// Convex combination alpha * CE + (1 - alpha) * EPG; the gradient-level and
// loss-level forms coincide because alpha does not depend on the parameters.
LossOutput aepg_loss(const ConstMatRef& logits, const std::vector<int>& labels,
                     double alpha_t);
LossOutput focal_loss(const ConstMatRef& logits, const std::vector<int>& labels,
                      double gamma);
LossOutput label_smoothing_loss(const ConstMatRef& logits,
                                const std::vector<int>& labels, double gamma);
LossOutput confidence_penalty_loss(const ConstMatRef& logits,
                                   const std::vector<int>& labels, double beta);
LossOutput entropy_penalty_loss(const ConstMatRef& logits,
                                const std::vector<int>& labels, double beta);

enum class ReinforceMode {
  Sample,     // Monte Carlo over actions
  Enumerate,  // exact expectation over actions; equals epg_loss
};

struct ReinforceEstimate {
  double loss = 0.0;  // Monte Carlo estimate of -J
  Mat grad;           // descent direction w.r.t. logits
  std::vector<int> actions;     // sampled actions, sample-major
  std::vector<double> rewards;  // rewards of those actions
};

// Sample mode draws n_samples actions per input by inverse-CDF sampling from
// the policy and averages the score-function estimator; enumerate mode sums
// over all actions weighted by the policy, which must reproduce epg_loss
// exactly.
ReinforceEstimate reinforce_grad(const ConstMatRef& logits,
                                 const std::vector<int>& labels, int n_samples,
                                 Rng& rng,
                                 ReinforceMode mode = ReinforceMode::Sample);

// Per-sample check of g_CE = -(1/p(y)) g_EPG-ascent at the logits: returns
// max_j |g_CE_j + g_EPG-ascent_j / p(y)|, or nullopt (skipped) when
// p(y) <= 1e-12 and the division would be meaningless.
std::optional<double> grad_ratio_check(const Eigen::Ref<const RowVec>& logits,
                                       int label);

// Tape expression for any loss kind (Reinforce maps to its enumeration
// form). alpha_t only affects AdaptiveEpg.
Var loss_expr(const LossSpec& spec, Var logits,
              const std::vector<int>& labels, double alpha_t = 1.0);

// Analytic dispatch used by the training loop. rng is only consulted for
// Reinforce; alpha_t only for AdaptiveEpg.
LossOutput eval_loss(const LossSpec& spec, const ConstMatRef& logits,
                     const std::vector<int>& labels, double alpha_t,
                     Rng* rng = nullptr);

}  // namespace epgrad
