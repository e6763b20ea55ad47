#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>

#include "epgrad/harness.hpp"
#include "epgrad/model.hpp"
#include "epgrad/softmax.hpp"

using namespace epgrad;

namespace {

Mat random_input(Rng& rng, Index n, Index d) {
  Mat x(n, d);
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < d; ++j) x(i, j) = rng.normal();
  }
  return x;
}

}  // namespace

TEST_CASE("head initialization") {
  SUBCASE("std of 1e4 drawn entries lands in [0.0009, 0.0011]") {
    Rng rng(1);
    MlpPolicy m(8, 100, 1, rng);
    Rng head_rng(2);
    m.extend_head(100, 0.001, head_rng);  // 100 x 100 = 1e4 weight entries
    const Mat* w = nullptr;
    for (const auto& [name, p] : m.named_params()) {
      if (name == "head.w") w = p;
    }
    REQUIRE(w != nullptr);
    const double mean = w->mean();
    const double sd = std::sqrt((w->array() - mean).square().mean());
    CHECK(sd > 0.0009);
    CHECK(sd < 0.0011);
  }
  SUBCASE("std = 0 gives all-zero columns") {
    Rng rng(1), head_rng(2);
    MlpPolicy m(8, 16, 1, rng);
    m.extend_head(3, 0.0, head_rng);
    Mat x = Mat::Ones(2, 8);
    CHECK(m.predict(x).cwiseAbs().maxCoeff() == 0.0);
  }
  SUBCASE("same seed twice gives identical weights") {
    Rng rng_a(5), rng_b(5);
    MlpPolicy a(8, 16, 2, rng_a);
    MlpPolicy b(8, 16, 2, rng_b);
    Rng ha(9), hb(9);
    a.extend_head(4, 0.001, ha);
    b.extend_head(4, 0.001, hb);
    Rng in(3);
    const Mat x = random_input(in, 5, 8);
    CHECK((a.predict(x) - b.predict(x)).cwiseAbs().maxCoeff() == 0.0);
  }
  SUBCASE("invalid arguments rejected") {
    Rng rng(1);
    MlpPolicy m(8, 16, 1, rng);
    CHECK_THROWS_AS(m.extend_head(0, 0.001, rng), std::invalid_argument);
    CHECK_THROWS_AS(m.extend_head(-2, 0.001, rng), std::invalid_argument);
  }
}

TEST_CASE("predict") {
  Rng rng(7);
  SUBCASE("zero head weights give uniform softmax rows") {
    MlpPolicy m(6, 12, 2, rng);
    Rng head_rng(1);
    m.extend_head(5, 0.0, head_rng);
    const Mat x = random_input(rng, 4, 6);
    const Mat probs = softmax_rows(m.predict(x));
    CHECK((probs.array() - 0.2).abs().maxCoeff() < 1e-15);
  }
  SUBCASE("softmax rows sum to one within 1e-12") {
    MlpPolicy m(6, 32, 2, rng);
    Rng head_rng(1);
    m.extend_head(7, 0.5, head_rng);
    const Mat probs = softmax_rows(m.predict(random_input(rng, 20, 6)));
    for (Index i = 0; i < probs.rows(); ++i) {
      CHECK(std::abs(probs.row(i).sum() - 1.0) < 1e-12);
    }
  }
  SUBCASE("dimension mismatch rejected") {
    MlpPolicy m(6, 12, 1, rng);
    Rng head_rng(1);
    m.extend_head(2, 0.1, head_rng);
    CHECK_THROWS_AS(m.predict(Mat::Zero(1, 5)), std::invalid_argument);
  }
}

TEST_CASE("adapter is an exact no-op at initialization") {
  Rng rng(11);
  MlpPolicy m(10, 24, 2, rng);
  Rng head_rng(3);
  m.extend_head(4, 0.3, head_rng);
  const Mat x = random_input(rng, 8, 10);
  const Mat before = m.predict(x);
  Rng ad_rng(4);
  m.attach_adapter(4, ad_rng);  // B = 0
  CHECK((m.predict(x) - before).cwiseAbs().maxCoeff() == 0.0);
  CHECK(m.adapter_rank() == 4);
}

TEST_CASE("head extension preserves old-class logits exactly") {
  Rng rng(13);
  MlpPolicy m(5, 16, 2, rng);
  Rng head_rng(8);
  m.extend_head(3, 0.2, head_rng);
  const Mat x = random_input(rng, 6, 5);
  const Mat before = m.predict(x);
  m.extend_head(2, 0.2, head_rng);
  const Mat after = m.predict(x);
  CHECK(m.k_seen() == 5);
  CHECK((after.leftCols(3) - before).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("freeze semantics") {
  Rng rng(17);
  MlpPolicy m(6, 16, 2, rng);
  Rng head_rng(2);
  m.extend_head(3, 0.1, head_rng);
  const Mat x = random_input(rng, 12, 6);
  const std::vector<int> y = {0, 1, 2, 0, 1, 2, 0, 1, 2, 0, 1, 2};

  auto snapshot = [&](const std::string& prefix) {
    std::vector<Mat> out;
    for (const auto& [name, p] : m.named_params()) {
      if (name.rfind(prefix, 0) == 0) out.push_back(*p);
    }
    return out;
  };

  auto sgd_step = [&]() {
    Tape t;
    auto bind = m.forward(t, x);
    const LossOutput lo = ce_loss(t.value(bind.logits), y);
    t.backward_seeded(bind.logits, lo.grad);
    OptimizerCfg cfg;
    cfg.kind = OptimizerCfg::Kind::Sgd;
    cfg.lr = 0.1;
    Optimizer opt(cfg);
    opt.step(bind, t);
  };

  SUBCASE("frozen trunk stays bit-identical; head still trains") {
    m.set_trunk_frozen(true);
    const auto trunk_before = snapshot("trunk.");
    const auto head_before = snapshot("head.");
    sgd_step();
    const auto trunk_after = snapshot("trunk.");
    const auto head_after = snapshot("head.");
    for (std::size_t i = 0; i < trunk_before.size(); ++i) {
      CHECK((trunk_before[i] - trunk_after[i]).cwiseAbs().maxCoeff() == 0.0);
    }
    bool head_moved = false;
    for (std::size_t i = 0; i < head_before.size(); ++i) {
      if ((head_before[i] - head_after[i]).cwiseAbs().maxCoeff() > 0.0) {
        head_moved = true;
      }
    }
    CHECK(head_moved);
  }

  SUBCASE("unfrozen trunk receives nonzero gradient") {
    m.set_trunk_frozen(false);
    Tape t;
    auto bind = m.forward(t, x);
    const LossOutput lo = ce_loss(t.value(bind.logits), y);
    t.backward_seeded(bind.logits, lo.grad);
    double trunk_gnorm = 0.0;
    for (std::size_t i = 0; i < bind.trainable.size(); ++i) {
      if (bind.names[i].rfind("trunk.", 0) == 0) {
        trunk_gnorm += t.grad(bind.trainable[i].first).norm();
      }
    }
    CHECK(trunk_gnorm > 0.0);
  }
}

TEST_CASE("checkpoint json round-trip is bit-exact") {
  Rng rng(23);
  MlpPolicy m(7, 20, 2, rng);
  Rng head_rng(5);
  m.extend_head(6, 0.37, head_rng);
  Rng ad_rng(6);
  m.attach_adapter(3, ad_rng);

  // nudge parameters to awkward values (subnormal-ish, negative, tiny)
  Tape t;
  const Mat x = random_input(rng, 4, 7);
  auto bind = m.forward(t, x);
  const std::vector<int> y = {0, 1, 2, 3};
  const LossOutput lo = ce_loss(t.value(bind.logits), y);
  t.backward_seeded(bind.logits, lo.grad);
  OptimizerCfg cfg;
  Optimizer opt(cfg);
  opt.step(bind, t);

  const std::string path = "checkpoint_roundtrip_test.json";
  m.save_json(path);
  const MlpPolicy loaded = MlpPolicy::load_json(path);
  std::remove(path.c_str());

  const auto a = m.named_params();
  const auto b = loaded.named_params();
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].first == b[i].first);
    REQUIRE(a[i].second->rows() == b[i].second->rows());
    REQUIRE(a[i].second->cols() == b[i].second->cols());
    // bitwise equality, not approximate
    for (Index r = 0; r < a[i].second->rows(); ++r) {
      for (Index c = 0; c < a[i].second->cols(); ++c) {
        CHECK((*a[i].second)(r, c) == (*b[i].second)(r, c));
      }
    }
  }
  const Mat x2 = random_input(rng, 3, 7);
  CHECK((m.predict(x2) - loaded.predict(x2)).cwiseAbs().maxCoeff() == 0.0);
}
