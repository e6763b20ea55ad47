// Class-incremental training and evaluation: task splitting, the optimizer
// loop with its freeze schedule, accuracy-matrix metrics, per-step tracing,
// label-noise and train-from-scratch modes.
#pragma once

#include <cstdint>
#include <memory>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "epgrad/data.hpp"
#include "epgrad/losses.hpp"
#include "epgrad/mdp.hpp"
#include "epgrad/model.hpp"
#include "epgrad/rng.hpp"
#include "epgrad/schedule.hpp"
#include "epgrad/types.hpp"

namespace epgrad {

// ---------------------------------------------------------------------------
// configuration

struct DatasetCfg {
  enum class Kind { Blobs, Idx, Csv };
  Kind kind = Kind::Blobs;
  // blobs
  int classes = 20;
  int dim = 16;
  int per_class = 300;
  double spread = 1.05;
  double margin = 3.0;
  // idx
  std::string train_images, train_labels, test_images, test_labels;
  // csv
  std::string path;
  int label_col = -1;
  double test_fraction = 0.2;
  // first `pretext_classes` class ids are reserved for trunk pretraining and
  // excluded from the continual stream
  int pretext_classes = 10;
};

struct ModelCfg {
  int hidden = 128;
  int depth = 2;
  int adapter_rank = 4;      // 0 disables the adapter
  bool pretrained = true;    // pretrain the trunk on the pretext classes
  int pretrain_epochs = 30;
  double head_init_std = 0.001;
};

struct OptimizerCfg {
  enum class Kind { Sgd, Adam };
  Kind kind = Kind::Adam;
  double lr = 5e-4;  // SGD default is 0.05; set by the config parser
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct ScheduleCfg {
  ScheduleKind kind = ScheduleKind::Sigmoid;
  double tau = 6.0;
  double value = 1.0;  // constant kind
  ScheduleScope scope = ScheduleScope::PerTask;
};

struct TrainCfg {
  int epochs = 20;
  int batch = 64;
  // fraction of each task's epochs during which the trunk stays frozen
  // (adapter and head keep training); 30-of-50 in spirit
  double freeze_frac = 0.6;
};

struct ExperimentConfig {
  DatasetCfg dataset;
  int n_tasks = 5;
  ModelCfg model;
  LossSpec loss;
  ScheduleCfg schedule;
  OptimizerCfg optimizer;
  double noise_eta = 0.0;
  TrainCfg train;
  std::vector<std::uint64_t> seeds{1, 2, 3};
  std::string out_dir;
};

// ---------------------------------------------------------------------------
// tasks and metrics

struct Task {
  std::vector<int> class_ids;   // original dataset labels
  std::vector<int> train_idx;   // rows of the train split
  std::vector<int> test_idx;    // rows of the test split
};

struct TaskSequence {
  std::vector<Task> tasks;
  // original class id -> head column, in order of first appearance; -1 for
  // classes outside the sequence
  std::vector<int> head_index;
};

// Shuffles the class order with the seed, then cuts contiguous chunks;
// remainder classes go to the last task. Throws if n_tasks exceeds the
// class count.
TaskSequence split_tasks(const Dataset& train, const Dataset& test,
                         int n_tasks, std::uint64_t seed);
TaskSequence split_tasks_subset(const Dataset& train, const Dataset& test,
                                const std::vector<int>& class_ids, int n_tasks,
                                std::uint64_t seed);

// a(i, j) = accuracy on task i after training task j, i <= j. Stored
// column-by-column as tasks finish.
struct AccuracyMatrix {
  std::vector<std::vector<double>> cols;  // cols[j][i]
  int num_tasks() const { return static_cast<int>(cols.size()); }
  bool complete() const;
  double at(int task, int after_task) const;
};

struct SequenceMetrics {
  double end_accuracy = 0.0;      // A_T  = (1/T) sum_i a(i, T)
  double average_accuracy = 0.0;  // ~A_T = (1/T) sum_t A_t
  // max_{j<T} a(i,j) - a(i,T); diagnostic only, not one of the paper-style
  // headline metrics
  std::vector<double> forgetting;
};

// Exact metric formulas; throws on an incomplete matrix.
SequenceMetrics metrics(const AccuracyMatrix& acc);

// ---------------------------------------------------------------------------
// training

struct TraceRow {
  long step = 0;
  int task = 0;
  int epoch = 0;
  double alpha = 1.0;
  double loss = 0.0;
  double entropy = 0.0;  // mean output entropy of the training batch
};

class TrainingAbort : public std::runtime_error {
 public:
  TrainingAbort(const std::string& msg, int task, int epoch, long step)
      : std::runtime_error(msg), task(task), epoch(epoch), step(step) {}
  int task;
  int epoch;
  long step;
};

// SGD or Adam over the trainable bindings of a forward pass. Adam moments are
// keyed by parameter name and survive head growth (new columns start with
// fresh moments).
class Optimizer {
 public:
  explicit Optimizer(const OptimizerCfg& cfg) : cfg_(cfg) {}
  void step(const MlpPolicy::TapeBinding& bind, const Tape& tape);

 private:
  struct State {
    Mat m, v;
    long t = 0;
  };
  OptimizerCfg cfg_;
  std::unordered_map<std::string, State> states_;
};

struct TaskView {
  Mat x;
  std::vector<int> y;  // head-indexed labels
};

// Mini-batch loop over one task: shuffles per epoch, applies the freeze
// schedule, queries and advances the annealing state every optimizer step,
// records one trace row per step. Aborts with TrainingAbort on NaN loss.
void train_task(MlpPolicy& model, const TaskView& data, const LossSpec& loss,
                Optimizer& opt, AnnealState& anneal, const TrainCfg& tcfg,
                int task_id, Rng& batch_rng, Rng& sample_rng,
                std::vector<TraceRow>& trace, long& global_step);

// Accuracy column a(i, j) for i <= upto_task, argmax over all seen classes.
// Pure: does not touch the model or any rng.
std::vector<double> evaluate(const MlpPolicy& model,
                             const std::vector<TaskView>& test_views,
                             int upto_task);

// ---------------------------------------------------------------------------
// experiment orchestration

struct RunResult {
  AccuracyMatrix acc;
  SequenceMetrics metrics;
  std::vector<TraceRow> trace;
  double final_entropy = 0.0;  // mean test-set entropy after the last task
  std::uint64_t seed = 0;
};

// Pretrains a trunk on the pretext classes exactly the way run_experiment
// would for this config and seed. Exposed so many runs that share a seed can
// reuse one trunk.
MlpPolicy pretrain_trunk(const ExperimentConfig& cfg, std::uint64_t seed);

// One full run for one seed. All randomness (data generation, task split,
// noise, init, batching, action sampling) derives from the seed through
// independent substreams, so identical config+seed is bit-reproducible.
// `pretrained` may carry a trunk previously built by pretrain_trunk for the
// same config+seed; passing nullptr recomputes it in-run.
RunResult run_experiment(const ExperimentConfig& cfg, std::uint64_t seed,
                         const MlpPolicy* pretrained = nullptr);

}  // namespace epgrad
