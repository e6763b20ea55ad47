#include "epgrad/harness.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "epgrad/softmax.hpp"

namespace epgrad {

// ---------------------------------------------------------------------------
// task splitting

TaskSequence split_tasks(const Dataset& train, const Dataset& test,
                         int n_tasks, std::uint64_t seed) {
  std::vector<int> all(static_cast<std::size_t>(train.num_classes));
  std::iota(all.begin(), all.end(), 0);
  return split_tasks_subset(train, test, all, n_tasks, seed);
}

TaskSequence split_tasks_subset(const Dataset& train, const Dataset& test,
                                const std::vector<int>& class_ids, int n_tasks,
                                std::uint64_t seed) {
  if (n_tasks <= 0) throw std::invalid_argument("split_tasks: n_tasks <= 0");
  if (n_tasks > static_cast<int>(class_ids.size())) {
    throw std::invalid_argument("split_tasks: more tasks (" +
                                std::to_string(n_tasks) + ") than classes (" +
                                std::to_string(class_ids.size()) + ")");
  }
  std::vector<int> order = class_ids;
  Rng rng(seed);
  rng.shuffle(order);

  TaskSequence seq;
  seq.head_index.assign(static_cast<std::size_t>(train.num_classes), -1);
  const int per = static_cast<int>(order.size()) / n_tasks;
  int next_head = 0;
  std::size_t cursor = 0;
  for (int t = 0; t < n_tasks; ++t) {
    Task task;
    // remainder classes all land in the last task
    const std::size_t take =
        (t == n_tasks - 1) ? order.size() - cursor : static_cast<std::size_t>(per);
    for (std::size_t i = 0; i < take; ++i) {
      const int c = order[cursor++];
      task.class_ids.push_back(c);
      seq.head_index[static_cast<std::size_t>(c)] = next_head++;
    }
    seq.tasks.push_back(std::move(task));
  }

  auto assign = [&](const std::vector<int>& labels, bool is_train) {
    for (std::size_t i = 0; i < labels.size(); ++i) {
      const int h = seq.head_index[static_cast<std::size_t>(labels[i])];
      if (h < 0) continue;  // class outside this sequence
      for (Task& task : seq.tasks) {
        if (std::find(task.class_ids.begin(), task.class_ids.end(),
                      labels[i]) != task.class_ids.end()) {
          (is_train ? task.train_idx : task.test_idx)
              .push_back(static_cast<int>(i));
          break;
        }
      }
    }
  };
  assign(train.labels, true);
  assign(test.labels, false);
  return seq;
}

// ---------------------------------------------------------------------------
// metrics

bool AccuracyMatrix::complete() const {
  for (std::size_t j = 0; j < cols.size(); ++j) {
    if (cols[j].size() != j + 1) return false;
  }
  return !cols.empty();
}

double AccuracyMatrix::at(int task, int after_task) const {
  return cols.at(static_cast<std::size_t>(after_task))
      .at(static_cast<std::size_t>(task));
}

SequenceMetrics metrics(const AccuracyMatrix& acc) {
  if (!acc.complete()) {
    throw std::invalid_argument("metrics: incomplete accuracy matrix");
  }
  const int T = acc.num_tasks();
  SequenceMetrics m;
  double sum_at = 0.0;
  for (int j = 0; j < T; ++j) {
    const auto& col = acc.cols[static_cast<std::size_t>(j)];
    sum_at += std::accumulate(col.begin(), col.end(), 0.0) /
              static_cast<double>(col.size());
  }
  const auto& last = acc.cols.back();
  m.end_accuracy = std::accumulate(last.begin(), last.end(), 0.0) /
                   static_cast<double>(T);
  m.average_accuracy = sum_at / static_cast<double>(T);
  m.forgetting.resize(static_cast<std::size_t>(T), 0.0);
  for (int i = 0; i < T; ++i) {
    double best = 0.0;
    for (int j = i; j < T - 1; ++j) best = std::max(best, acc.at(i, j));
    m.forgetting[static_cast<std::size_t>(i)] =
        T > 1 && i < T - 1 ? best - acc.at(i, T - 1) : 0.0;
  }
  return m;
}

// ---------------------------------------------------------------------------
// optimizer

namespace {

// Resizes an Adam moment to match a grown parameter, preserving the existing
// block and zeroing new entries.
void grow_like(Mat& state, const Mat& ref) {
  if (state.rows() == ref.rows() && state.cols() == ref.cols()) return;
  Mat next = Mat::Zero(ref.rows(), ref.cols());
  const Index r = std::min(state.rows(), ref.rows());
  const Index c = std::min(state.cols(), ref.cols());
  if (r > 0 && c > 0) next.topLeftCorner(r, c) = state.topLeftCorner(r, c);
  state = std::move(next);
}

}  // namespace

void Optimizer::step(const MlpPolicy::TapeBinding& bind, const Tape& tape) {
  for (std::size_t i = 0; i < bind.trainable.size(); ++i) {
    const auto& [var, param] = bind.trainable[i];
    const Mat& g = tape.grad(var);
    if (cfg_.kind == OptimizerCfg::Kind::Sgd) {
      *param -= cfg_.lr * g;
      continue;
    }
    State& s = states_[bind.names[i]];
    if (s.t == 0 && s.m.size() == 0) {
      s.m = Mat::Zero(param->rows(), param->cols());
      s.v = Mat::Zero(param->rows(), param->cols());
    }
    grow_like(s.m, *param);
    grow_like(s.v, *param);
    ++s.t;
    s.m = cfg_.beta1 * s.m + (1.0 - cfg_.beta1) * g;
    s.v = cfg_.beta2 * s.v + (1.0 - cfg_.beta2) * g.cwiseProduct(g);
    const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(s.t));
    const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(s.t));
    const Mat m_hat = s.m / bc1;
    const Mat v_hat = s.v / bc2;
    param->array() -=
        cfg_.lr * m_hat.array() / (v_hat.array().sqrt() + cfg_.eps);
  }
}

// ---------------------------------------------------------------------------
// training loop

void train_task(MlpPolicy& model, const TaskView& data, const LossSpec& loss,
                Optimizer& opt, AnnealState& anneal, const TrainCfg& tcfg,
                int task_id, Rng& batch_rng, Rng& sample_rng,
                std::vector<TraceRow>& trace, long& global_step) {
  const Index n = data.x.rows();
  if (n == 0) throw std::invalid_argument("train_task: empty task");
  const int epochs_frozen =
      static_cast<int>(std::llround(tcfg.freeze_frac * tcfg.epochs));

  std::vector<int> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);

  for (int epoch = 0; epoch < tcfg.epochs; ++epoch) {
    model.set_trunk_frozen(epoch < epochs_frozen);
    batch_rng.shuffle(order);
    for (Index start = 0; start < n; start += tcfg.batch) {
      const Index b = std::min<Index>(tcfg.batch, n - start);
      Mat xb(b, data.x.cols());
      std::vector<int> yb(static_cast<std::size_t>(b));
      for (Index r = 0; r < b; ++r) {
        const int src = order[static_cast<std::size_t>(start + r)];
        xb.row(r) = data.x.row(src);
        yb[static_cast<std::size_t>(r)] = data.y[static_cast<std::size_t>(src)];
      }

      Tape tape;
      MlpPolicy::TapeBinding bind = model.forward(tape, xb);
      const Mat& logits = tape.value(bind.logits);
      const double a = alpha(anneal);
      const LossOutput lo = eval_loss(loss, logits, yb, a, &sample_rng);
      if (!std::isfinite(lo.loss)) {
        throw TrainingAbort("train_task: non-finite loss " +
                                std::to_string(lo.loss) + " at task " +
                                std::to_string(task_id) + ", epoch " +
                                std::to_string(epoch) + ", step " +
                                std::to_string(global_step),
                            task_id, epoch, global_step);
      }
      const double batch_entropy = mean_entropy(softmax_rows(logits));

      tape.backward_seeded(bind.logits, lo.grad);
      opt.step(bind, tape);
      advance(anneal);

      trace.push_back(TraceRow{global_step, task_id, epoch, a, lo.loss,
                               batch_entropy});
      ++global_step;
    }
  }
  model.set_trunk_frozen(false);
}

std::vector<double> evaluate(const MlpPolicy& model,
                             const std::vector<TaskView>& test_views,
                             int upto_task) {
  std::vector<double> col;
  for (int i = 0; i <= upto_task; ++i) {
    const TaskView& v = test_views[static_cast<std::size_t>(i)];
    const std::vector<int> pred = argmax_rows(model.predict(v.x));
    col.push_back(1.0 - zero_one_loss(pred, v.y));
  }
  return col;
}

// ---------------------------------------------------------------------------
// experiment orchestration

namespace {

DatasetPair build_dataset(const ExperimentConfig& cfg, Rng& rng) {
  switch (cfg.dataset.kind) {
    case DatasetCfg::Kind::Blobs:
      return gaussian_blobs(cfg.dataset.classes, cfg.dataset.dim,
                            cfg.dataset.per_class, cfg.dataset.spread,
                            cfg.dataset.margin, rng.next_u64());
    case DatasetCfg::Kind::Idx: {
      DatasetPair p;
      p.train = load_idx(cfg.dataset.train_images, cfg.dataset.train_labels);
      p.test = load_idx(cfg.dataset.test_images, cfg.dataset.test_labels);
      p.test.num_classes = p.train.num_classes =
          std::max(p.train.num_classes, p.test.num_classes);
      return p;
    }
    case DatasetCfg::Kind::Csv: {
      Dataset all = load_csv(cfg.dataset.path, cfg.dataset.label_col);
      DatasetPair p = split_train_test(all, cfg.dataset.test_fraction, rng);
      standardize(p.train, p.test);
      return p;
    }
  }
  throw std::invalid_argument("build_dataset: unhandled dataset kind");
}

TaskView make_view(const Dataset& ds, const std::vector<int>& idx,
                   const std::vector<int>& label_map) {
  TaskView v;
  v.x = Mat(static_cast<Index>(idx.size()), ds.x.cols());
  v.y.resize(idx.size());
  for (std::size_t i = 0; i < idx.size(); ++i) {
    v.x.row(static_cast<Index>(i)) = ds.x.row(idx[i]);
    v.y[i] = label_map[static_cast<std::size_t>(
        ds.labels[static_cast<std::size_t>(idx[i])])];
  }
  return v;
}

std::vector<int> continual_class_ids(const ExperimentConfig& cfg,
                                     int num_classes) {
  const int p = std::min(cfg.dataset.pretext_classes, num_classes - 1);
  std::vector<int> ids;
  for (int c = p; c < num_classes; ++c) ids.push_back(c);
  return ids;
}

long task_steps(Index n_samples, const TrainCfg& t) {
  const long per_epoch =
      (static_cast<long>(n_samples) + t.batch - 1) / t.batch;
  return per_epoch * t.epochs;
}

// alpha is queried before each update, so the horizon is steps-1: the first
// step sees alpha_0 and the last step sees alpha_T exactly.
long anneal_horizon(Index n_samples, const TrainCfg& t) {
  return std::max<long>(1, task_steps(n_samples, t) - 1);
}

}  // namespace

MlpPolicy pretrain_trunk(const ExperimentConfig& cfg, std::uint64_t seed) {
  Rng root(seed);
  Rng data_rng = root.substream(Stream::kDataGen);
  Rng init_rng = root.substream(Stream::kInit);
  const DatasetPair data = build_dataset(cfg, data_rng);

  MlpPolicy model(static_cast<int>(data.train.x.cols()), cfg.model.hidden,
                  cfg.model.depth, init_rng);
  if (!cfg.model.pretrained) return model;

  const int p = std::min(cfg.dataset.pretext_classes,
                         data.train.num_classes - 1);
  // pretext classes are ids [0, p); they map onto head columns in id order
  std::vector<int> label_map(static_cast<std::size_t>(data.train.num_classes),
                             -1);
  std::vector<int> idx;
  for (std::size_t i = 0; i < data.train.labels.size(); ++i) {
    if (data.train.labels[i] < p) idx.push_back(static_cast<int>(i));
  }
  for (int c = 0; c < p; ++c) label_map[static_cast<std::size_t>(c)] = c;
  if (idx.empty()) {
    throw std::invalid_argument("pretrain_trunk: no pretext samples");
  }
  model.extend_head(p, cfg.model.head_init_std, init_rng);

  TaskView view = make_view(data.train, idx, label_map);
  Optimizer opt(cfg.optimizer);
  Rng batch_rng = root.substream(Stream::kPretrain);
  Rng sample_rng = root.substream(Stream::kActionSampling);
  AnnealState anneal;  // unused by CE but train_task advances it
  anneal.kind = ScheduleKind::Constant;
  anneal.T = anneal_horizon(view.x.rows(), TrainCfg{cfg.model.pretrain_epochs,
                                                    cfg.train.batch, 0.0});
  std::vector<TraceRow> scratch_trace;
  long step = 0;
  LossSpec pretrain_loss;
  pretrain_loss.kind = LossKind::CrossEntropy;
  train_task(model, view, pretrain_loss, opt, anneal,
             TrainCfg{cfg.model.pretrain_epochs, cfg.train.batch, 0.0},
             /*task_id=*/-1, batch_rng, sample_rng, scratch_trace, step);
  model.reset_head();
  return model;
}

RunResult run_experiment(const ExperimentConfig& cfg, std::uint64_t seed,
                         const MlpPolicy* pretrained) {
  Rng root(seed);
  Rng data_rng = root.substream(Stream::kDataGen);
  const DatasetPair data = build_dataset(cfg, data_rng);

  MlpPolicy model = pretrained != nullptr ? *pretrained
                                          : pretrain_trunk(cfg, seed);
  Rng init_rng = root.substream(Stream::kContinualInit);
  if (cfg.model.adapter_rank > 0) {
    model.attach_adapter(cfg.model.adapter_rank, init_rng);
  }

  Rng split_rng = root.substream(Stream::kTaskSplit);
  TaskSequence seq = split_tasks_subset(
      data.train, data.test, continual_class_ids(cfg, data.train.num_classes),
      cfg.n_tasks, split_rng.next_u64());

  // fixed noisy labels per task, drawn once at load time; flips stay inside
  // the task's own class set so every label remains trainable
  Rng noise_rng = root.substream(Stream::kNoise);
  std::vector<std::vector<int>> train_labels_by_task;
  for (const Task& task : seq.tasks) {
    std::vector<int> ys;
    ys.reserve(task.train_idx.size());
    for (int r : task.train_idx) {
      ys.push_back(data.train.labels[static_cast<std::size_t>(r)]);
    }
    if (cfg.noise_eta > 0.0) {
      // channel acts on within-task class positions
      std::vector<int> pos(ys.size());
      for (std::size_t i = 0; i < ys.size(); ++i) {
        pos[i] = static_cast<int>(
            std::find(task.class_ids.begin(), task.class_ids.end(), ys[i]) -
            task.class_ids.begin());
      }
      NoiseChannel ch{cfg.noise_eta, static_cast<int>(task.class_ids.size())};
      pos = apply_noise(pos, ch, noise_rng);
      for (std::size_t i = 0; i < ys.size(); ++i) {
        ys[i] = task.class_ids[static_cast<std::size_t>(pos[i])];
      }
    }
    train_labels_by_task.push_back(std::move(ys));
  }

  // global-scope schedules span the whole sequence
  AnnealState anneal;
  anneal.kind = cfg.schedule.kind;
  anneal.tau = cfg.schedule.tau;
  anneal.value = cfg.schedule.value;
  anneal.scope = cfg.schedule.scope;
  if (anneal.scope == ScheduleScope::Global) {
    long total = 0;
    for (const Task& task : seq.tasks) {
      total += task_steps(static_cast<Index>(task.train_idx.size()), cfg.train);
    }
    anneal.T = std::max<long>(1, total - 1);
  }

  Optimizer opt(cfg.optimizer);
  Rng batch_rng = root.substream(Stream::kBatching);
  Rng sample_rng = root.substream(Stream::kActionSampling);

  std::vector<TaskView> test_views;
  for (const Task& task : seq.tasks) {
    test_views.push_back(make_view(data.test, task.test_idx, seq.head_index));
  }

  RunResult result;
  result.seed = seed;
  long global_step = 0;
  for (std::size_t j = 0; j < seq.tasks.size(); ++j) {
    const Task& task = seq.tasks[j];
    model.extend_head(static_cast<int>(task.class_ids.size()),
                      cfg.model.head_init_std, init_rng);

    TaskView view;
    view.x = Mat(static_cast<Index>(task.train_idx.size()), data.train.x.cols());
    view.y.resize(task.train_idx.size());
    for (std::size_t i = 0; i < task.train_idx.size(); ++i) {
      view.x.row(static_cast<Index>(i)) = data.train.x.row(task.train_idx[i]);
      view.y[i] = seq.head_index[static_cast<std::size_t>(
          train_labels_by_task[j][i])];
    }

    reset_for_task(anneal, anneal_horizon(view.x.rows(), cfg.train));
    train_task(model, view, cfg.loss, opt, anneal, cfg.train,
               static_cast<int>(j), batch_rng, sample_rng, result.trace,
               global_step);
    result.acc.cols.push_back(evaluate(model, test_views, static_cast<int>(j)));
  }
  result.metrics = metrics(result.acc);

  // mean output entropy over the full continual test stream
  Index total_rows = 0;
  for (const TaskView& v : test_views) total_rows += v.x.rows();
  Mat all_x(total_rows, data.test.x.cols());
  Index at = 0;
  for (const TaskView& v : test_views) {
    all_x.middleRows(at, v.x.rows()) = v.x;
    at += v.x.rows();
  }
  result.final_entropy = mean_entropy(softmax_rows(model.predict(all_x)));
  return result;
}

}  // namespace epgrad
