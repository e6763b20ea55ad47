#include "epgrad/losses.hpp"

#include <cmath>
#include <numeric>
#include <stdexcept>

#include "epgrad/mdp.hpp"
#include "epgrad/softmax.hpp"

namespace epgrad {

LossKind loss_kind_from_string(const std::string& s) {
  if (s == "ce") return LossKind::CrossEntropy;
  if (s == "epg") return LossKind::Epg;
  if (s == "aepg") return LossKind::AdaptiveEpg;
  if (s == "reinforce") return LossKind::Reinforce;
  if (s == "focal") return LossKind::Focal;
  if (s == "label_smooth") return LossKind::LabelSmooth;
  if (s == "conf_penalty") return LossKind::ConfidencePenalty;
  if (s == "entropy_penalty") return LossKind::EntropyPenalty;
  throw std::invalid_argument("unknown loss kind: " + s);
}

std::string to_string(LossKind k) {
  switch (k) {
    case LossKind::CrossEntropy: return "ce";
    case LossKind::Epg: return "epg";
    case LossKind::AdaptiveEpg: return "aepg";
    case LossKind::Reinforce: return "reinforce";
    case LossKind::Focal: return "focal";
    case LossKind::LabelSmooth: return "label_smooth";
    case LossKind::ConfidencePenalty: return "conf_penalty";
    case LossKind::EntropyPenalty: return "entropy_penalty";
  }
  return "?";
}

namespace {

void check_labels(const ConstMatRef& logits, const std::vector<int>& labels) {
  if (static_cast<Index>(labels.size()) != logits.rows()) {
    throw std::invalid_argument("loss: labels/logits row count mismatch");
  }
  for (int y : labels) {
    if (y < 0 || y >= logits.cols()) {
      throw std::invalid_argument("loss: label out of range: " +
                                  std::to_string(y));
    }
  }
}

std::vector<int> iota_rows(Index n) {
  std::vector<int> r(static_cast<std::size_t>(n));
  std::iota(r.begin(), r.end(), 0);
  return r;
}

}  // namespace

LossOutput ce_loss(const ConstMatRef& logits, const std::vector<int>& labels) {
  check_labels(logits, labels);
  const Index n = logits.rows();
  const Mat lp = log_softmax_rows(logits);
  const Mat p = lp.array().exp();
  LossOutput out;
  out.grad = p / static_cast<double>(n);
  for (Index i = 0; i < n; ++i) {
    const int y = labels[static_cast<std::size_t>(i)];
    out.loss -= lp(i, y);
    out.grad(i, y) -= 1.0 / static_cast<double>(n);
  }
  out.loss /= static_cast<double>(n);
  return out;
}

LossOutput epg_loss(const ConstMatRef& logits, const std::vector<int>& labels) {
  check_labels(logits, labels);
  const Index n = logits.rows();
  const Mat p = softmax_rows(logits);
  LossOutput out;
  out.grad = Mat::Zero(logits.rows(), logits.cols());
  for (Index i = 0; i < n; ++i) {
    const int y = labels[static_cast<std::size_t>(i)];
    const double py = p(i, y);
    out.loss -= py;
    // d(-p_y)/dz = -p_y (onehot(y) - p)
    out.grad.row(i) = py * p.row(i) / static_cast<double>(n);
    out.grad(i, y) -= py / static_cast<double>(n);
  }
  out.loss /= static_cast<double>(n);
  return out;
}

LossOutput aepg_loss(const ConstMatRef& logits, const std::vector<int>& labels,
                     double alpha_t) {
  if (alpha_t < 0.0 || alpha_t > 1.0) {
    throw std::invalid_argument("aepg_loss: alpha_t outside [0,1]");
  }
  const LossOutput ce = ce_loss(logits, labels);
  const LossOutput epg = epg_loss(logits, labels);
  LossOutput out;
  out.loss = alpha_t * ce.loss + (1.0 - alpha_t) * epg.loss;
  out.grad = alpha_t * ce.grad + (1.0 - alpha_t) * epg.grad;
  return out;
}

LossOutput focal_loss(const ConstMatRef& logits, const std::vector<int>& labels,
                      double gamma) {
  if (gamma < 0.0) throw std::invalid_argument("focal_loss: gamma < 0");
  check_labels(logits, labels);
  if (gamma == 0.0) return ce_loss(logits, labels);
  const Index n = logits.rows();
  const Mat lp = log_softmax_rows(logits);
  const Mat p = lp.array().exp();
  LossOutput out;
  out.grad = Mat::Zero(logits.rows(), logits.cols());
  for (Index i = 0; i < n; ++i) {
    const int y = labels[static_cast<std::size_t>(i)];
    const double py = p(i, y);
    const double one_m = 1.0 - py;
    const double w = std::pow(one_m, gamma);
    out.loss += w * (-lp(i, y));
    // dL/dp_y = gamma (1-p_y)^(gamma-1) log p_y - (1-p_y)^gamma / p_y,
    // chained through dp_y/dz = p_y (onehot(y) - p).
    const double dldpy =
        gamma * std::pow(one_m, gamma - 1.0) * lp(i, y) - w / py;
    out.grad.row(i) = -dldpy * py * p.row(i) / static_cast<double>(n);
    out.grad(i, y) += dldpy * py / static_cast<double>(n);
  }
  out.loss /= static_cast<double>(n);
  return out;
}

LossOutput label_smoothing_loss(const ConstMatRef& logits,
                                const std::vector<int>& labels, double gamma) {
  if (gamma < 0.0 || gamma >= 1.0) {
    throw std::invalid_argument("label_smoothing_loss: gamma outside [0,1)");
  }
  check_labels(logits, labels);
  const Index n = logits.rows();
  const Index k = logits.cols();
  const Mat lp = log_softmax_rows(logits);
  const Mat p = lp.array().exp();
  const double invk = 1.0 / static_cast<double>(k);
  const LossOutput ce = ce_loss(logits, labels);
  // KL(u || p) = sum_k (1/K)(log(1/K) - log p_k), gradient p - u.
  double kl = 0.0;
  for (Index i = 0; i < n; ++i) {
    for (Index c = 0; c < k; ++c) kl += invk * (std::log(invk) - lp(i, c));
  }
  kl /= static_cast<double>(n);
  LossOutput out;
  out.loss = (1.0 - gamma) * ce.loss + gamma * kl;
  out.grad = (1.0 - gamma) * ce.grad +
             gamma * (p.array() - invk).matrix() / static_cast<double>(n);
  return out;
}

namespace {

// Batch-mean entropy of softmax(logits) and its gradient w.r.t. logits:
// dH/dz_j = -p_j (log p_j + H(p)) per row.
void entropy_and_grad(const Mat& lp, const Mat& p, double* h_mean,
                      Mat* dh_dz) {
  const Index n = lp.rows();
  *dh_dz = Mat::Zero(lp.rows(), lp.cols());
  double total = 0.0;
  for (Index i = 0; i < n; ++i) {
    const double h = -(p.row(i).array() * lp.row(i).array()).sum();
    total += h;
    dh_dz->row(i) =
        (-p.row(i).array() * (lp.row(i).array() + h)) / static_cast<double>(n);
  }
  *h_mean = total / static_cast<double>(n);
}

}  // namespace

LossOutput confidence_penalty_loss(const ConstMatRef& logits,
                                   const std::vector<int>& labels,
                                   double beta) {
  if (beta < 0.0) throw std::invalid_argument("confidence_penalty_loss: beta < 0");
  check_labels(logits, labels);
  const Mat lp = log_softmax_rows(logits);
  const Mat p = lp.array().exp();
  double h = 0.0;
  Mat dh;
  entropy_and_grad(lp, p, &h, &dh);
  const LossOutput ce = ce_loss(logits, labels);
  LossOutput out;
  out.loss = ce.loss - beta * h;
  out.grad = ce.grad - beta * dh;
  return out;
}

LossOutput entropy_penalty_loss(const ConstMatRef& logits,
                                const std::vector<int>& labels, double beta) {
  if (beta < 0.0) throw std::invalid_argument("entropy_penalty_loss: beta < 0");
  check_labels(logits, labels);
  const Mat lp = log_softmax_rows(logits);
  const Mat p = lp.array().exp();
  double h = 0.0;
  Mat dh;
  entropy_and_grad(lp, p, &h, &dh);
  const LossOutput ce = ce_loss(logits, labels);
  LossOutput out;
  out.loss = ce.loss + beta * h;
  out.grad = ce.grad + beta * dh;
  return out;
}

ReinforceEstimate reinforce_grad(const ConstMatRef& logits,
                                 const std::vector<int>& labels, int n_samples,
                                 Rng& rng, ReinforceMode mode) {
  check_labels(logits, labels);
  if (mode == ReinforceMode::Sample && n_samples < 1) {
    throw std::invalid_argument("reinforce_grad: n_samples must be >= 1");
  }
  const Index n = logits.rows();
  const Index k = logits.cols();
  const Mat p = softmax_rows(logits);
  ReinforceEstimate est;
  est.grad = Mat::Zero(n, k);

  if (mode == ReinforceMode::Enumerate) {
    // sum_a p(a) R_a grad log p(a) collapses to p(y)(onehot(y) - p);
    // identical to the EPG gradient.
    for (Index i = 0; i < n; ++i) {
      const int y = labels[static_cast<std::size_t>(i)];
      const double py = p(i, y);
      est.loss -= py;
      est.grad.row(i) = py * p.row(i) / static_cast<double>(n);
      est.grad(i, y) -= py / static_cast<double>(n);
    }
    est.loss /= static_cast<double>(n);
    return est;
  }

  const double norm = static_cast<double>(n) * static_cast<double>(n_samples);
  for (Index i = 0; i < n; ++i) {
    const int y = labels[static_cast<std::size_t>(i)];
    for (int s = 0; s < n_samples; ++s) {
      const int a = rng.categorical(p.row(i).data(), static_cast<int>(k));
      const double r = reward(y, a);
      est.actions.push_back(a);
      est.rewards.push_back(r);
      est.loss -= r;
      if (r != 0.0) {
        // descent of -J: -R (onehot(a) - p)
        est.grad.row(i) += r * p.row(i) / norm;
        est.grad(i, a) -= r / norm;
      }
    }
  }
  est.loss /= norm;
  return est;
}

std::optional<double> grad_ratio_check(const Eigen::Ref<const RowVec>& logits,
                                       int label) {
  if (label < 0 || label >= logits.size()) {
    throw std::invalid_argument("grad_ratio_check: label out of range");
  }
  Mat z(1, logits.size());
  z.row(0) = logits;
  const Mat p = softmax_rows(z);
  const double py = p(0, label);
  if (py <= 1e-12) return std::nullopt;
  // Per-sample (no 1/N): CE descent p - onehot(y); EPG ascent p_y(onehot(y)-p).
  RowVec g_ce = p.row(0);
  g_ce[label] -= 1.0;
  RowVec g_epg = -py * p.row(0);
  g_epg[label] += py;
  return (g_ce + g_epg / py).cwiseAbs().maxCoeff();
}

Var loss_expr(const LossSpec& spec, Var logits,
              const std::vector<int>& labels, double alpha_t) {
  Tape& t = *logits.tape;
  const Index n = t.value(logits).rows();
  const Index k = t.value(logits).cols();
  const std::vector<int> rows = iota_rows(n);

  const Var lp = log_softmax(logits);
  const Var lp_y = gather(lp, rows, labels);  // 1xN of log p(y_i)
  const Var ce = neg(mean(lp_y));

  switch (spec.kind) {
    case LossKind::CrossEntropy:
      return ce;
    case LossKind::Epg:
    case LossKind::Reinforce:  // enumeration form
      return neg(mean(exp(lp_y)));
    case LossKind::AdaptiveEpg: {
      const Var epg = neg(mean(exp(lp_y)));
      return add(scale(ce, alpha_t), scale(epg, 1.0 - alpha_t));
    }
    case LossKind::Focal: {
      // mean over samples of (1 - p_y)^gamma * (-log p_y)
      const Var py = exp(lp_y);
      const Var one_m = add_const(neg(py), 1.0);
      const Var w = exp(scale(log(one_m), spec.gamma));
      return neg(mean(mul(w, lp_y)));
    }
    case LossKind::LabelSmooth: {
      const double invk = 1.0 / static_cast<double>(k);
      // KL(u||p) batch mean = log(1/K) - mean over all elements of log p
      const Var kl = add_const(neg(mean(lp)), std::log(invk));
      return add(scale(ce, 1.0 - spec.gamma), scale(kl, spec.gamma));
    }
    case LossKind::ConfidencePenalty:
    case LossKind::EntropyPenalty: {
      // batch-mean entropy = -K * mean(p .* log p)
      const Var ent =
          scale(mean(mul(exp(lp), lp)), -static_cast<double>(k));
      const double sign =
          spec.kind == LossKind::ConfidencePenalty ? -spec.beta : spec.beta;
      return add(ce, scale(ent, sign));
    }
  }
  throw std::invalid_argument("loss_expr: unhandled loss kind");
}

LossOutput eval_loss(const LossSpec& spec, const ConstMatRef& logits,
                     const std::vector<int>& labels, double alpha_t,
                     Rng* rng) {
  switch (spec.kind) {
    case LossKind::CrossEntropy:
      return ce_loss(logits, labels);
    case LossKind::Epg:
      return epg_loss(logits, labels);
    case LossKind::AdaptiveEpg:
      return aepg_loss(logits, labels, alpha_t);
    case LossKind::Reinforce: {
      if (rng == nullptr) {
        throw std::invalid_argument("eval_loss: reinforce requires an rng");
      }
      ReinforceEstimate est =
          reinforce_grad(logits, labels, spec.reinforce_samples, *rng);
      return LossOutput{est.loss, std::move(est.grad)};
    }
    case LossKind::Focal:
      return focal_loss(logits, labels, spec.gamma);
    case LossKind::LabelSmooth:
      return label_smoothing_loss(logits, labels, spec.gamma);
    case LossKind::ConfidencePenalty:
      return confidence_penalty_loss(logits, labels, spec.beta);
    case LossKind::EntropyPenalty:
      return entropy_penalty_loss(logits, labels, spec.beta);
  }
  throw std::invalid_argument("eval_loss: unhandled loss kind");
}

}  // namespace epgrad
