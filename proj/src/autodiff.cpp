#include "epgrad/autodiff.hpp"

#include <cmath>
#include <utility>

#include "epgrad/softmax.hpp"

namespace epgrad {

namespace {

void check_same_tape(const char* op, Var a, Var b) {
  if (a.tape == nullptr || a.tape != b.tape) {
    throw ShapeError(op, "operands belong to different tapes");
  }
}

bool is_scalar(const Mat& m) { return m.rows() == 1 && m.cols() == 1; }

}  // namespace

Var Tape::leaf(Mat value) { return emit(std::move(value), BackFn{}); }

Var Tape::emit(Mat value, BackFn back) {
  nodes_.push_back(Node{std::move(value), Mat{}, std::move(back), false});
  return Var{this, static_cast<int>(nodes_.size()) - 1};
}

const Mat& Tape::value(Var v) const { return nodes_.at(v.id).value; }

const Mat& Tape::grad(Var v) const {
  const Node& n = nodes_.at(v.id);
  if (n.grad.size() == 0) {
    n.grad = Mat::Zero(n.value.rows(), n.value.cols());
  }
  return n.grad;
}

void Tape::add_grad(int id, const Mat& contribution) {
  Node& n = nodes_.at(id);
  if (n.grad.size() == 0) {
    n.grad = contribution;
  } else {
    n.grad += contribution;
  }
  n.touched = true;
}

void Tape::backward(Var root) {
  const Mat& v = value(root);
  if (!is_scalar(v)) {
    throw ShapeError("backward",
                     "root must be scalar (1x1), got " + shape_str(v));
  }
  backward_seeded(root, Mat::Ones(1, 1));
}

void Tape::backward_seeded(Var node, const Mat& seed) {
  const Mat& v = value(node);
  if (seed.rows() != v.rows() || seed.cols() != v.cols()) {
    throw ShapeError("backward_seeded", "seed " + shape_str(seed) +
                                            " does not match node " +
                                            shape_str(v));
  }
  for (Node& n : nodes_) {
    n.grad.resize(0, 0);
    n.touched = false;
  }
  add_grad(node.id, seed);
  run_backward();
}

void Tape::run_backward() {
  // Nodes are recorded in topological order, so one reverse sweep visits
  // each node exactly once.
  for (int i = static_cast<int>(nodes_.size()) - 1; i >= 0; --i) {
    Node& n = nodes_[i];
    if (!n.touched || !n.back) continue;
    n.back(*this, n.grad);
  }
}

// ---------------------------------------------------------------------------
// ops

Var matmul(Var a, Var b) {
  check_same_tape("matmul", a, b);
  Tape& t = *a.tape;
  const Mat& av = t.value(a);
  const Mat& bv = t.value(b);
  if (av.cols() != bv.rows()) {
    throw ShapeError("matmul", "lhs " + shape_str(av) +
                                   " incompatible with rhs " + shape_str(bv));
  }
  Mat out = av * bv;
  const int ai = a.id, bi = b.id;
  return t.emit(std::move(out), [ai, bi](Tape& tp, const Mat& g) {
    const Mat& av2 = tp.value(Var{&tp, ai});
    const Mat& bv2 = tp.value(Var{&tp, bi});
    tp.add_grad(ai, g * bv2.transpose());
    tp.add_grad(bi, av2.transpose() * g);
  });
}

Var add(Var a, Var b) {
  check_same_tape("add", a, b);
  Tape& t = *a.tape;
  const Mat& av = t.value(a);
  const Mat& bv = t.value(b);
  if (av.rows() != bv.rows() || av.cols() != bv.cols()) {
    throw ShapeError("add", "lhs " + shape_str(av) + " vs rhs " +
                                shape_str(bv));
  }
  const int ai = a.id, bi = b.id;
  return t.emit(av + bv, [ai, bi](Tape& tp, const Mat& g) {
    tp.add_grad(ai, g);
    tp.add_grad(bi, g);
  });
}

Var add_rowwise(Var m, Var row) {
  check_same_tape("add_rowwise", m, row);
  Tape& t = *m.tape;
  const Mat& mv = t.value(m);
  const Mat& rv = t.value(row);
  if (rv.rows() != 1 || rv.cols() != mv.cols()) {
    throw ShapeError("add_rowwise", "matrix " + shape_str(mv) +
                                        " vs row " + shape_str(rv));
  }
  Mat out = mv.rowwise() + rv.row(0);
  const int mi = m.id, ri = row.id;
  return t.emit(std::move(out), [mi, ri](Tape& tp, const Mat& g) {
    tp.add_grad(mi, g);
    tp.add_grad(ri, g.colwise().sum());
  });
}

Var mul(Var a, Var b) {
  check_same_tape("mul", a, b);
  Tape& t = *a.tape;
  const Mat& av = t.value(a);
  const Mat& bv = t.value(b);
  if (av.rows() != bv.rows() || av.cols() != bv.cols()) {
    throw ShapeError("mul", "lhs " + shape_str(av) + " vs rhs " +
                                shape_str(bv));
  }
  const int ai = a.id, bi = b.id;
  return t.emit(av.cwiseProduct(bv), [ai, bi](Tape& tp, const Mat& g) {
    tp.add_grad(ai, g.cwiseProduct(tp.value(Var{&tp, bi})));
    tp.add_grad(bi, g.cwiseProduct(tp.value(Var{&tp, ai})));
  });
}

Var sub(Var a, Var b) { return add(a, neg(b)); }

Var relu(Var a) {
  Tape& t = *a.tape;
  const Mat& av = t.value(a);
  const int ai = a.id;
  return t.emit(av.cwiseMax(0.0), [ai](Tape& tp, const Mat& g) {
    const Mat& x = tp.value(Var{&tp, ai});
    tp.add_grad(ai, (x.array() > 0.0).select(g, Mat::Zero(g.rows(), g.cols())));
  });
}

Var log(Var a) {
  Tape& t = *a.tape;
  const int ai = a.id;
  return t.emit(t.value(a).array().log().matrix(),
                [ai](Tape& tp, const Mat& g) {
                  const Mat& x = tp.value(Var{&tp, ai});
                  tp.add_grad(ai, (g.array() / x.array()).matrix());
                });
}

Var exp(Var a) {
  Tape& t = *a.tape;
  Mat out = t.value(a).array().exp();
  const int ai = a.id;
  Mat saved = out;
  return t.emit(std::move(out), [ai, saved](Tape& tp, const Mat& g) {
    tp.add_grad(ai, g.cwiseProduct(saved));
  });
}

Var sum(Var a) {
  Tape& t = *a.tape;
  const Mat& av = t.value(a);
  Mat out(1, 1);
  out(0, 0) = av.sum();
  const int ai = a.id;
  const Index r = av.rows(), c = av.cols();
  return t.emit(std::move(out), [ai, r, c](Tape& tp, const Mat& g) {
    tp.add_grad(ai, Mat::Constant(r, c, g(0, 0)));
  });
}

Var mean(Var a) {
  Tape& t = *a.tape;
  const Mat& av = t.value(a);
  Mat out(1, 1);
  out(0, 0) = av.mean();
  const int ai = a.id;
  const Index r = av.rows(), c = av.cols();
  const double inv = 1.0 / static_cast<double>(r * c);
  return t.emit(std::move(out), [ai, r, c, inv](Tape& tp, const Mat& g) {
    tp.add_grad(ai, Mat::Constant(r, c, g(0, 0) * inv));
  });
}

Var scale(Var a, double c) {
  Tape& t = *a.tape;
  const int ai = a.id;
  return t.emit(t.value(a) * c, [ai, c](Tape& tp, const Mat& g) {
    tp.add_grad(ai, g * c);
  });
}

Var add_const(Var a, double c) {
  Tape& t = *a.tape;
  const int ai = a.id;
  return t.emit(t.value(a).array() + c, [ai](Tape& tp, const Mat& g) {
    tp.add_grad(ai, g);
  });
}

Var neg(Var a) { return scale(a, -1.0); }

Var gather(Var m, std::vector<int> rows, std::vector<int> cols) {
  Tape& t = *m.tape;
  const Mat& mv = t.value(m);
  if (rows.size() != cols.size()) {
    throw ShapeError("gather", "rows/cols index lists differ in length");
  }
  Mat out(1, static_cast<Index>(rows.size()));
  for (std::size_t j = 0; j < rows.size(); ++j) {
    if (rows[j] < 0 || rows[j] >= mv.rows() || cols[j] < 0 ||
        cols[j] >= mv.cols()) {
      throw ShapeError("gather", "index (" + std::to_string(rows[j]) + "," +
                                     std::to_string(cols[j]) +
                                     ") out of range for " + shape_str(mv));
    }
    out(0, static_cast<Index>(j)) = mv(rows[j], cols[j]);
  }
  const int mi = m.id;
  const Index r = mv.rows(), c = mv.cols();
  return t.emit(std::move(out),
                [mi, r, c, rows = std::move(rows),
                 cols = std::move(cols)](Tape& tp, const Mat& g) {
                  Mat gm = Mat::Zero(r, c);
                  for (std::size_t j = 0; j < rows.size(); ++j) {
                    gm(rows[j], cols[j]) += g(0, static_cast<Index>(j));
                  }
                  tp.add_grad(mi, gm);
                });
}

Var log_softmax(Var z) {
  Tape& t = *z.tape;
  Mat out = log_softmax_rows(t.value(z));
  Mat probs = out.array().exp();
  const int zi = z.id;
  return t.emit(std::move(out), [zi, probs](Tape& tp, const Mat& g) {
    // d/dz of log_softmax: g - softmax(z) * rowsum(g)
    Mat gz = g;
    for (Index i = 0; i < g.rows(); ++i) {
      gz.row(i) -= probs.row(i) * g.row(i).sum();
    }
    tp.add_grad(zi, gz);
  });
}

// ---------------------------------------------------------------------------

double fd_check(const std::function<double(const std::vector<Mat>&)>& f,
                const std::vector<Mat>& params,
                const std::vector<Mat>& analytic_grads, double eps) {
  if (eps <= 0.0) throw std::invalid_argument("fd_check: eps must be > 0");
  if (params.size() != analytic_grads.size()) {
    throw std::invalid_argument("fd_check: params/grads count mismatch");
  }
  std::vector<Mat> work = params;
  double max_rel = 0.0;
  for (std::size_t p = 0; p < work.size(); ++p) {
    Mat& m = work[p];
    for (Index i = 0; i < m.rows(); ++i) {
      for (Index j = 0; j < m.cols(); ++j) {
        const double orig = m(i, j);
        m(i, j) = orig + eps;
        const double fp = f(work);
        m(i, j) = orig - eps;
        const double fm = f(work);
        m(i, j) = orig;
        if (!std::isfinite(fp) || !std::isfinite(fm)) {
          throw std::runtime_error("fd_check: non-finite function value");
        }
        const double g_fd = (fp - fm) / (2.0 * eps);
        const double g_ad = analytic_grads[p](i, j);
        const double rel =
            std::abs(g_ad - g_fd) / (std::abs(g_fd) + 1e-8);
        if (rel > max_rel) max_rel = rel;
      }
    }
  }
  return max_rel;
}

}  // namespace epgrad
