#include "epgrad/mdp.hpp"

#include <cmath>
#include <stdexcept>

#include "epgrad/softmax.hpp"

namespace epgrad {

double zero_one_loss(const std::vector<int>& predictions,
                     const std::vector<int>& labels) {
  if (predictions.empty()) {
    throw std::invalid_argument("zero_one_loss: empty input");
  }
  if (predictions.size() != labels.size()) {
    throw std::invalid_argument("zero_one_loss: length mismatch");
  }
  std::size_t wrong = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (predictions[i] != labels[i]) ++wrong;
  }
  return static_cast<double>(wrong) / static_cast<double>(labels.size());
}

std::vector<int> argmax_rows(const ConstMatRef& logits) {
  std::vector<int> out(static_cast<std::size_t>(logits.rows()));
  for (Index i = 0; i < logits.rows(); ++i) {
    int best = 0;
    for (Index k = 1; k < logits.cols(); ++k) {
      if (logits(i, k) > logits(i, best)) best = static_cast<int>(k);
    }
    out[static_cast<std::size_t>(i)] = best;
  }
  return out;
}

namespace {

void check_simplex_rows(const ConstMatRef& probs) {
  for (Index i = 0; i < probs.rows(); ++i) {
    if (std::abs(probs.row(i).sum() - 1.0) > 1e-9) {
      throw std::invalid_argument("policy row " + std::to_string(i) +
                                  " is not normalized");
    }
  }
}

void check_labels(const ConstMatRef& probs, const std::vector<int>& labels) {
  if (static_cast<Index>(labels.size()) != probs.rows()) {
    throw std::invalid_argument("labels/rows count mismatch");
  }
  for (int y : labels) {
    if (y < 0 || y >= probs.cols()) {
      throw std::invalid_argument("label out of range: " + std::to_string(y));
    }
  }
}

}  // namespace

double rl_objective(const ConstMatRef& probs, const std::vector<int>& labels) {
  check_simplex_rows(probs);
  check_labels(probs, labels);
  double j = 0.0;
  for (Index i = 0; i < probs.rows(); ++i) {
    j += probs(i, labels[static_cast<std::size_t>(i)]);
  }
  return j / static_cast<double>(probs.rows());
}

double noisy_objective_exact(const ConstMatRef& probs,
                             const std::vector<int>& labels, double eta) {
  if (probs.cols() < 2) {
    throw std::invalid_argument("noisy_objective_exact: needs K >= 2 classes");
  }
  if (eta < 0.0 || eta > 1.0) {
    throw std::invalid_argument("noisy_objective_exact: eta outside [0,1]");
  }
  check_simplex_rows(probs);
  check_labels(probs, labels);
  const double k1 = static_cast<double>(probs.cols() - 1);
  double j = 0.0;
  for (Index i = 0; i < probs.rows(); ++i) {
    const double py = probs(i, labels[static_cast<std::size_t>(i)]);
    j += (1.0 - eta) * py + eta / k1 * (1.0 - py);
  }
  return j / static_cast<double>(probs.rows());
}

bool prop2_rank_check(const ConstMatRef& probs_a, const ConstMatRef& probs_b,
                      const std::vector<int>& labels, double eta) {
  const double k = static_cast<double>(probs_a.cols());
  if (eta >= 1.0 - 1.0 / k) {
    throw std::invalid_argument(
        "prop2_rank_check: requires eta < 1 - 1/K");
  }
  auto sgn = [](double x) { return x > 1e-12 ? 1 : (x < -1e-12 ? -1 : 0); };
  const double d_clean =
      rl_objective(probs_a, labels) - rl_objective(probs_b, labels);
  const double d_noisy = noisy_objective_exact(probs_a, labels, eta) -
                         noisy_objective_exact(probs_b, labels, eta);
  return sgn(d_clean) == sgn(d_noisy);
}

KlIdentity prop3_identity(const Vec& p, int true_class, double eta) {
  if (eta <= 0.0 || eta >= 1.0) {
    throw std::invalid_argument("prop3_identity: eta must lie in (0,1)");
  }
  const int k = static_cast<int>(p.size());
  if (true_class < 0 || true_class >= k) {
    throw std::invalid_argument("prop3_identity: true_class out of range");
  }
  for (int i = 0; i < k; ++i) {
    if (p[i] <= 0.0) {
      throw std::invalid_argument(
          "prop3_identity: p must be strictly positive (KL undefined)");
    }
  }
  const double off = eta / static_cast<double>(k - 1);
  double kl = 0.0;
  double h = 0.0;
  for (int i = 0; i < k; ++i) {
    const double q = (i == true_class) ? 1.0 - eta : off;
    kl += p[i] * std::log(p[i] / q);
    h -= p[i] * std::log(p[i]);
  }
  const double a = std::log(1.0 - eta) - std::log(off);
  const double b = std::log(off);
  KlIdentity r;
  r.lhs = -kl - h;
  r.rhs = a * p[true_class] + b;
  r.diff = std::abs(r.lhs - r.rhs);
  return r;
}

double mean_entropy(const ConstMatRef& probs) {
  double h = 0.0;
  for (Index i = 0; i < probs.rows(); ++i) {
    RowVec row = probs.row(i);
    h += row_entropy(row);
  }
  return h / static_cast<double>(probs.rows());
}

std::vector<int> apply_noise(const std::vector<int>& labels,
                             const NoiseChannel& channel, Rng& rng) {
  if (channel.eta < 0.0 || channel.eta > 1.0 || channel.num_classes < 2) {
    throw std::invalid_argument("apply_noise: invalid channel");
  }
  std::vector<int> out = labels;
  for (int& y : out) {
    if (rng.uniform() < channel.eta) {
      // uniform over the other K-1 classes
      int r = static_cast<int>(rng.below(
          static_cast<std::uint64_t>(channel.num_classes - 1)));
      if (r >= y) ++r;
      y = r;
    }
  }
  return out;
}

}  // namespace epgrad
