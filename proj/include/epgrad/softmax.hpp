// Stable rowwise softmax / log-softmax / entropy on plain matrices. These are
// shared by the losses, the policy model and the MDP analysis helpers; the
// autodiff tape has its own log_softmax node that uses the same stabilization.
#pragma once

#include "epgrad/types.hpp"

namespace epgrad {

// Rowwise log softmax with max subtraction so exp never overflows.
inline Mat log_softmax_rows(const ConstMatRef& z) {
  Mat out(z.rows(), z.cols());
  for (Index i = 0; i < z.rows(); ++i) {
    const double m = z.row(i).maxCoeff();
    const auto shifted = z.row(i).array() - m;
    const double lse = std::log(shifted.exp().sum());
    out.row(i) = shifted - lse;
  }
  return out;
}

inline Mat softmax_rows(const ConstMatRef& z) {
  return log_softmax_rows(z).array().exp();
}

// Shannon entropy of one simplex row, natural log, with 0*log(0) := 0.
inline double row_entropy(const Eigen::Ref<const RowVec>& p) {
  double h = 0.0;
  for (Index k = 0; k < p.size(); ++k) {
    if (p[k] > 0.0) h -= p[k] * std::log(p[k]);
  }
  return h;
}

}  // namespace epgrad
