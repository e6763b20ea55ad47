// Softmax policy over class logits: an MLP trunk (relu) with a classifier
// head that grows as new classes arrive, plus an optional low-rank adapter on
// every trunk weight (effective weight W + B*A, B zero-initialized so the
// adapter starts as an exact no-op).
#pragma once

#include <string>
#include <utility>
#include <vector>

#include "epgrad/autodiff.hpp"
#include "epgrad/rng.hpp"
#include "epgrad/types.hpp"

namespace epgrad {

class MlpPolicy {
 public:
  // Trunk weights He-initialized from init_rng; head starts with 0 classes.
  MlpPolicy(int input_dim, int hidden_width, int hidden_depth, Rng& init_rng);

  // Low-rank factors on every trunk layer: B = 0, A ~ N(0, 0.02^2).
  void attach_adapter(int rank, Rng& rng);
  bool has_adapter() const { return !adapters_.empty(); }
  int adapter_rank() const;

  // Appends k_new head columns drawn N(0, std^2) (bias entries zero);
  // existing columns are untouched. Throws on k_new <= 0 or std < 0.
  void extend_head(int k_new, double std, Rng& rng);

  // Drops the head back to 0 classes (e.g. after trunk pretraining).
  void reset_head();

  void set_trunk_frozen(bool frozen) { trunk_frozen_ = frozen; }
  bool trunk_frozen() const { return trunk_frozen_; }

  int k_seen() const { return static_cast<int>(head_w_.cols()); }
  int input_dim() const { return in_dim_; }
  int hidden_width() const { return hidden_; }
  int hidden_depth() const { return depth_; }

  // Deterministic tape-free forward pass; rows of softmax(predict(x)) are
  // unit-sum. Throws on input dimension mismatch.
  Mat predict(const ConstMatRef& x) const;

  struct TapeBinding {
    Var logits;
    // Trainable parameters only: frozen trunk weights enter the tape as
    // constants, so they receive zero gradient and the optimizer never sees
    // them.
    std::vector<std::pair<Var, Mat*>> trainable;
    std::vector<std::string> names;  // parallel to trainable
  };
  TapeBinding forward(Tape& tape, const ConstMatRef& x);

  // Named views over every parameter (for checkpointing and tests).
  std::vector<std::pair<std::string, const Mat*>> named_params() const;

  // Checkpoint round-trips are bit-exact: doubles are stored as hex-float
  // strings in JSON.
  void save_json(const std::string& path) const;
  static MlpPolicy load_json(const std::string& path);

 private:
  MlpPolicy() = default;

  struct Layer {
    Mat w;  // in x out
    Mat b;  // 1 x out
  };
  struct Adapter {
    Mat b_factor;  // in x r
    Mat a_factor;  // r x out
  };

  Mat effective_weight(std::size_t layer) const;

  int in_dim_ = 0;
  int hidden_ = 0;
  int depth_ = 0;
  bool trunk_frozen_ = false;
  std::vector<Layer> trunk_;
  std::vector<Adapter> adapters_;
  Mat head_w_;  // hidden x k_seen
  Mat head_b_;  // 1 x k_seen
};

}  // namespace epgrad
