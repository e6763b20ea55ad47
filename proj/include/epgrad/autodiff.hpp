// Tape-based reverse-mode automatic differentiation over dense row-major
// matrices. Values are rank-2 at most: a scalar is a 1x1 matrix, a vector a
// 1xN row. Shape rules are deliberately strict -- the only broadcast is
// add_rowwise (a row added to every row of a matrix).
//
// Usage:
//   Tape t;
//   Var x = t.leaf(batch);
//   Var z = add_rowwise(matmul(x, t.leaf(w)), t.leaf(b));
//   Var l = mean(gather(log_softmax(z), rows, labels));
//   t.backward(l);
//   const Mat& gw = t.grad(w_var);
#pragma once

#include <functional>
#include <vector>

#include "epgrad/types.hpp"

namespace epgrad {

class Tape;

// Cheap handle into a tape. Valid for the lifetime of the tape it came from.
struct Var {
  Tape* tape = nullptr;
  int id = -1;
};

class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  // New differentiable input node.
  Var leaf(Mat value);

  const Mat& value(Var v) const;

  // Gradient of the last backward root w.r.t. v. Zero matrix for nodes the
  // root does not depend on.
  const Mat& grad(Var v) const;

  // Reverse pass from a scalar (1x1) root; seeds d(root)/d(root) = 1.
  void backward(Var root);

  // Reverse pass from an arbitrary node with an explicit upstream gradient,
  // e.g. an analytic dL/dlogits computed outside the tape.
  void backward_seeded(Var node, const Mat& seed);

  int size() const { return static_cast<int>(nodes_.size()); }

  // -- used by the op free functions --------------------------------------
  using BackFn = std::function<void(Tape&, const Mat& out_grad)>;
  Var emit(Mat value, BackFn back);
  void add_grad(int id, const Mat& contribution);

 private:
  struct Node {
    Mat value;
    mutable Mat grad;  // lazily materialized as zeros when queried
    BackFn back;       // empty for leaves
    bool touched = false;
  };
  void run_backward();
  std::vector<Node> nodes_;
};

// Forward primitives. Each checks operand shapes and throws ShapeError naming
// the op and both shapes on mismatch.
Var matmul(Var a, Var b);
Var add(Var a, Var b);            // same shape
Var add_rowwise(Var m, Var row);  // row (1xK) added to each row of m (NxK)
Var mul(Var a, Var b);            // elementwise, same shape
Var sub(Var a, Var b);
Var relu(Var a);
Var log(Var a);
Var exp(Var a);
Var sum(Var a);   // -> 1x1
Var mean(Var a);  // -> 1x1
Var scale(Var a, double c);
Var add_const(Var a, double c);
Var neg(Var a);

// out[j] = m(rows[j], cols[j]); duplicate index pairs accumulate gradient.
Var gather(Var m, std::vector<int> rows, std::vector<int> cols);

// Rowwise, max-subtraction stabilized.
Var log_softmax(Var z);

// Central-difference gradient check: perturbs every element of every
// parameter by +/- eps, evaluates f, and compares against the supplied
// analytic gradients. Returns max over elements of
// |g_analytic - g_fd| / (|g_fd| + 1e-8). Throws if eps <= 0 or f returns a
// non-finite value.
double fd_check(const std::function<double(const std::vector<Mat>&)>& f,
                const std::vector<Mat>& params,
                const std::vector<Mat>& analytic_grads, double eps);

}  // namespace epgrad
