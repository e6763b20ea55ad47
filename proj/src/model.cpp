#include "epgrad/model.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

namespace epgrad {

namespace {

Mat he_init(Index rows, Index cols, Rng& rng) {
  const double std = std::sqrt(2.0 / static_cast<double>(rows));
  Mat m(rows, cols);
  for (Index i = 0; i < rows; ++i) {
    for (Index j = 0; j < cols; ++j) m(i, j) = rng.normal(0.0, std);
  }
  return m;
}

std::string hex_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%a", v);
  return buf;
}

double parse_hex_double(const std::string& s) {
  return std::strtod(s.c_str(), nullptr);
}

}  // namespace

MlpPolicy::MlpPolicy(int input_dim, int hidden_width, int hidden_depth,
                     Rng& init_rng)
    : in_dim_(input_dim), hidden_(hidden_width), depth_(hidden_depth) {
  if (input_dim <= 0 || hidden_width <= 0 || hidden_depth <= 0) {
    throw std::invalid_argument("MlpPolicy: dimensions must be positive");
  }
  int in = input_dim;
  for (int d = 0; d < hidden_depth; ++d) {
    Layer l;
    l.w = he_init(in, hidden_width, init_rng);
    l.b = Mat::Zero(1, hidden_width);
    trunk_.push_back(std::move(l));
    in = hidden_width;
  }
  head_w_ = Mat(hidden_width, 0);
  head_b_ = Mat(1, 0);
}

void MlpPolicy::attach_adapter(int rank, Rng& rng) {
  if (rank <= 0) throw std::invalid_argument("attach_adapter: rank must be > 0");
  adapters_.clear();
  for (const Layer& l : trunk_) {
    Adapter a;
    a.b_factor = Mat::Zero(l.w.rows(), rank);
    a.a_factor = Mat(rank, l.w.cols());
    for (Index i = 0; i < a.a_factor.rows(); ++i) {
      for (Index j = 0; j < a.a_factor.cols(); ++j) {
        a.a_factor(i, j) = rng.normal(0.0, 0.02);
      }
    }
    adapters_.push_back(std::move(a));
  }
}

int MlpPolicy::adapter_rank() const {
  return adapters_.empty() ? 0
                           : static_cast<int>(adapters_[0].b_factor.cols());
}

void MlpPolicy::extend_head(int k_new, double std, Rng& rng) {
  if (k_new <= 0) throw std::invalid_argument("extend_head: k_new must be > 0");
  if (std < 0.0) throw std::invalid_argument("extend_head: std must be >= 0");
  const Index k_old = head_w_.cols();
  head_w_.conservativeResize(Eigen::NoChange, k_old + k_new);
  head_b_.conservativeResize(Eigen::NoChange, k_old + k_new);
  for (Index c = k_old; c < head_w_.cols(); ++c) {
    for (Index h = 0; h < head_w_.rows(); ++h) {
      head_w_(h, c) = std == 0.0 ? 0.0 : rng.normal(0.0, std);
    }
    head_b_(0, c) = 0.0;
  }
}

void MlpPolicy::reset_head() {
  head_w_ = Mat(hidden_, 0);
  head_b_ = Mat(1, 0);
}

Mat MlpPolicy::effective_weight(std::size_t layer) const {
  if (adapters_.empty()) return trunk_[layer].w;
  return trunk_[layer].w +
         adapters_[layer].b_factor * adapters_[layer].a_factor;
}

Mat MlpPolicy::predict(const ConstMatRef& x) const {
  if (x.cols() != in_dim_) {
    throw std::invalid_argument("predict: input has " +
                                std::to_string(x.cols()) +
                                " features, model expects " +
                                std::to_string(in_dim_));
  }
  if (k_seen() == 0) {
    throw std::logic_error("predict: head has no classes yet");
  }
  Mat h = x;
  for (std::size_t d = 0; d < trunk_.size(); ++d) {
    h = ((h * effective_weight(d)).rowwise() + trunk_[d].b.row(0))
            .cwiseMax(0.0);
  }
  return (h * head_w_).rowwise() + head_b_.row(0);
}

MlpPolicy::TapeBinding MlpPolicy::forward(Tape& tape, const ConstMatRef& x) {
  if (x.cols() != in_dim_) {
    throw std::invalid_argument("forward: input dimension mismatch");
  }
  if (k_seen() == 0) {
    throw std::logic_error("forward: head has no classes yet");
  }
  TapeBinding bind;
  auto trainable_leaf = [&](Mat* m, const std::string& name) {
    Var v = tape.leaf(*m);
    bind.trainable.emplace_back(v, m);
    bind.names.push_back(name);
    return v;
  };

  Var h = tape.leaf(x);
  for (std::size_t d = 0; d < trunk_.size(); ++d) {
    const std::string tag = "trunk." + std::to_string(d);
    Var w_eff;
    if (adapters_.empty()) {
      w_eff = trunk_frozen_ ? tape.leaf(trunk_[d].w)
                            : trainable_leaf(&trunk_[d].w, tag + ".w");
    } else {
      Var w = trunk_frozen_ ? tape.leaf(trunk_[d].w)
                            : trainable_leaf(&trunk_[d].w, tag + ".w");
      Var bf = trainable_leaf(&adapters_[d].b_factor, tag + ".adapter.b");
      Var af = trainable_leaf(&adapters_[d].a_factor, tag + ".adapter.a");
      w_eff = add(w, matmul(bf, af));
    }
    Var b = trunk_frozen_ ? tape.leaf(trunk_[d].b)
                          : trainable_leaf(&trunk_[d].b, tag + ".b");
    h = relu(add_rowwise(matmul(h, w_eff), b));
  }
  Var hw = trainable_leaf(&head_w_, "head.w");
  Var hb = trainable_leaf(&head_b_, "head.b");
  bind.logits = add_rowwise(matmul(h, hw), hb);
  return bind;
}

std::vector<std::pair<std::string, const Mat*>> MlpPolicy::named_params()
    const {
  std::vector<std::pair<std::string, const Mat*>> out;
  for (std::size_t d = 0; d < trunk_.size(); ++d) {
    const std::string tag = "trunk." + std::to_string(d);
    out.emplace_back(tag + ".w", &trunk_[d].w);
    out.emplace_back(tag + ".b", &trunk_[d].b);
    if (!adapters_.empty()) {
      out.emplace_back(tag + ".adapter.b", &adapters_[d].b_factor);
      out.emplace_back(tag + ".adapter.a", &adapters_[d].a_factor);
    }
  }
  out.emplace_back("head.w", &head_w_);
  out.emplace_back("head.b", &head_b_);
  return out;
}

void MlpPolicy::save_json(const std::string& path) const {
  nlohmann::json j;
  j["format"] = "epgrad-checkpoint-v1";
  j["input_dim"] = in_dim_;
  j["hidden"] = hidden_;
  j["depth"] = depth_;
  j["adapter_rank"] = adapter_rank();
  j["k_seen"] = k_seen();
  j["trunk_frozen"] = trunk_frozen_;
  nlohmann::json params = nlohmann::json::object();
  for (const auto& [name, m] : named_params()) {
    nlohmann::json entry;
    entry["shape"] = {m->rows(), m->cols()};
    std::vector<std::string> data;
    data.reserve(static_cast<std::size_t>(m->size()));
    for (Index i = 0; i < m->rows(); ++i) {
      for (Index k = 0; k < m->cols(); ++k) data.push_back(hex_double((*m)(i, k)));
    }
    entry["data"] = std::move(data);
    params[name] = std::move(entry);
  }
  j["params"] = std::move(params);
  std::ofstream f(path);
  if (!f) throw std::runtime_error("save_json: cannot open " + path);
  f << j.dump(1) << "\n";
}

MlpPolicy MlpPolicy::load_json(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("load_json: cannot open " + path);
  nlohmann::json j = nlohmann::json::parse(f);
  if (j.value("format", "") != "epgrad-checkpoint-v1") {
    throw std::runtime_error("load_json: unrecognized checkpoint format");
  }
  MlpPolicy m;
  m.in_dim_ = j.at("input_dim").get<int>();
  m.hidden_ = j.at("hidden").get<int>();
  m.depth_ = j.at("depth").get<int>();
  m.trunk_frozen_ = j.at("trunk_frozen").get<bool>();
  const int rank = j.at("adapter_rank").get<int>();
  const int k_seen = j.at("k_seen").get<int>();

  auto read_mat = [&](const std::string& name) {
    const nlohmann::json& entry = j.at("params").at(name);
    const Index rows = entry.at("shape").at(0).get<Index>();
    const Index cols = entry.at("shape").at(1).get<Index>();
    const auto& data = entry.at("data");
    if (static_cast<Index>(data.size()) != rows * cols) {
      throw std::runtime_error("load_json: bad element count for " + name);
    }
    Mat out(rows, cols);
    std::size_t idx = 0;
    for (Index i = 0; i < rows; ++i) {
      for (Index k = 0; k < cols; ++k) {
        out(i, k) = parse_hex_double(data.at(idx++).get<std::string>());
      }
    }
    return out;
  };

  for (int d = 0; d < m.depth_; ++d) {
    const std::string tag = "trunk." + std::to_string(d);
    Layer l;
    l.w = read_mat(tag + ".w");
    l.b = read_mat(tag + ".b");
    m.trunk_.push_back(std::move(l));
    if (rank > 0) {
      Adapter a;
      a.b_factor = read_mat(tag + ".adapter.b");
      a.a_factor = read_mat(tag + ".adapter.a");
      m.adapters_.push_back(std::move(a));
    }
  }
  m.head_w_ = read_mat("head.w");
  m.head_b_ = read_mat("head.b");
  if (m.head_w_.cols() != k_seen) {
    throw std::runtime_error("load_json: head size disagrees with k_seen");
  }
  return m;
}

}  // namespace epgrad
