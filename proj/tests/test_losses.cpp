#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "epgrad/losses.hpp"
#include "epgrad/mdp.hpp"
#include "epgrad/softmax.hpp"

using namespace epgrad;

namespace {

Mat random_logits(Rng& rng, Index n, Index k, double scale = 1.5) {
  Mat z(n, k);
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < k; ++j) z(i, j) = rng.normal(0.0, scale);
  }
  return z;
}

std::vector<int> random_labels(Rng& rng, Index n, Index k) {
  std::vector<int> y(static_cast<std::size_t>(n));
  for (auto& v : y) v = static_cast<int>(rng.below(static_cast<std::uint64_t>(k)));
  return y;
}

double max_abs_diff(const Mat& a, const Mat& b) {
  return (a - b).cwiseAbs().maxCoeff();
}

// fd oracle over the analytic loss value
double fd_on_loss(const LossSpec& spec, const Mat& z,
                  const std::vector<int>& y, double alpha) {
  const LossOutput out = eval_loss(spec, z, y, alpha, nullptr);
  return fd_check(
      [&](const std::vector<Mat>& p) {
        return eval_loss(spec, p[0], y, alpha, nullptr).loss;
      },
      {z}, {out.grad}, 1e-5);
}

}  // namespace

TEST_CASE("cross entropy") {
  SUBCASE("uniform logits analytic values") {
    Mat z(1, 2);
    z << 0.0, 0.0;
    const LossOutput out = ce_loss(z, {0});
    CHECK(out.loss == doctest::Approx(std::log(2.0)).epsilon(1e-15));
    CHECK(out.grad(0, 0) == doctest::Approx(-0.5).epsilon(1e-15));
    CHECK(out.grad(0, 1) == doctest::Approx(0.5).epsilon(1e-15));
  }
  SUBCASE("perfect prediction drives the loss to zero") {
    Mat z(1, 3);
    z << 40.0, 0.0, 0.0;
    CHECK(ce_loss(z, {0}).loss < 1e-12);
  }
  SUBCASE("matches finite differences") {
    Rng rng(101);
    LossSpec spec;
    spec.kind = LossKind::CrossEntropy;
    double worst = 0.0;
    for (int rep = 0; rep < 100; ++rep) {
      const Index n = 2 + static_cast<Index>(rng.below(4));
      const Index k = 3 + static_cast<Index>(rng.below(6));
      const Mat z = random_logits(rng, n, k);
      worst = std::max(worst, fd_on_loss(spec, z, random_labels(rng, n, k), 1.0));
    }
    CHECK(worst < 1e-5);
  }
  SUBCASE("out-of-range label rejected") {
    Mat z = Mat::Zero(1, 3);
    CHECK_THROWS_AS(ce_loss(z, {3}), std::invalid_argument);
  }
}

TEST_CASE("expected policy gradient loss") {
  SUBCASE("uniform logits analytic values") {
    Mat z(1, 2);
    z << 0.0, 0.0;
    const LossOutput out = epg_loss(z, {0});
    CHECK(out.loss == doctest::Approx(-0.5).epsilon(1e-15));
    CHECK(out.grad(0, 0) == doctest::Approx(-0.25).epsilon(1e-15));
    CHECK(out.grad(0, 1) == doctest::Approx(0.25).epsilon(1e-15));
  }
  SUBCASE("uniform logits, K classes: loss = -1/K") {
    for (int k : {2, 3, 10, 64}) {
      Mat z = Mat::Zero(4, k);
      const auto y = std::vector<int>{0, k - 1, k / 2, 0};
      CHECK(epg_loss(z, y).loss ==
            doctest::Approx(-1.0 / k).epsilon(1e-14));
    }
  }
  SUBCASE("matches finite differences") {
    Rng rng(102);
    LossSpec spec;
    spec.kind = LossKind::Epg;
    double worst = 0.0;
    for (int rep = 0; rep < 100; ++rep) {
      const Mat z = random_logits(rng, 3, 5);
      worst = std::max(worst, fd_on_loss(spec, z, random_labels(rng, 3, 5), 1.0));
    }
    CHECK(worst < 1e-5);
  }
}

TEST_CASE("reinforce estimator") {
  Rng rng(103);
  const Mat z = random_logits(rng, 5, 4);
  const auto y = random_labels(rng, 5, 4);

  SUBCASE("enumeration mode equals the EPG gradient") {
    const LossOutput epg = epg_loss(z, y);
    Rng r2(1);
    const ReinforceEstimate enu =
        reinforce_grad(z, y, 1, r2, ReinforceMode::Enumerate);
    CHECK(max_abs_diff(epg.grad, enu.grad) < 1e-12);
    CHECK(std::abs(epg.loss - enu.loss) < 1e-12);
  }

  SUBCASE("1e5 single-sample estimates average to EPG within 3 SE") {
    Rng r2(20240311);
    const LossOutput epg = epg_loss(z, y);
    const int m = 100000;
    Mat sum = Mat::Zero(z.rows(), z.cols());
    Mat sumsq = Mat::Zero(z.rows(), z.cols());
    for (int s = 0; s < m; ++s) {
      const ReinforceEstimate est = reinforce_grad(z, y, 1, r2);
      sum += est.grad;
      sumsq += est.grad.cwiseProduct(est.grad);
    }
    const Mat mean = sum / m;
    const Mat var = (sumsq / m - mean.cwiseProduct(mean)).cwiseMax(0.0);
    for (Index i = 0; i < z.rows(); ++i) {
      for (Index j = 0; j < z.cols(); ++j) {
        const double se = std::sqrt(var(i, j) / m);
        CHECK(std::abs(mean(i, j) - epg.grad(i, j)) <= 3.0 * se + 1e-12);
      }
    }
    CHECK(var.maxCoeff() > 0.0);  // sampling noise exists; EPG has none
  }

  SUBCASE("deterministic one-hot policy has zero sampling variance") {
    Mat zdet(2, 3);
    zdet << 200.0, 0.0, 0.0, 0.0, 0.0, 200.0;
    const std::vector<int> ydet = {0, 2};
    const LossOutput epg = epg_loss(zdet, ydet);
    Rng r2(7);
    Mat first;
    for (int s = 0; s < 200; ++s) {
      const ReinforceEstimate est = reinforce_grad(zdet, ydet, 1, r2);
      if (s == 0) first = est.grad;
      CHECK(max_abs_diff(est.grad, first) == 0.0);
    }
    CHECK(max_abs_diff(first, epg.grad) < 1e-12);
  }

  SUBCASE("averaged estimates converge at the Monte Carlo rate") {
    // error of an M-sample mean should shrink like 1/sqrt(M)
    const LossOutput epg = epg_loss(z, y);
    Rng r2(55);
    auto mean_err = [&](int m, int reps) {
      double err = 0.0;
      for (int r = 0; r < reps; ++r) {
        Mat acc = Mat::Zero(z.rows(), z.cols());
        for (int s = 0; s < m; ++s) acc += reinforce_grad(z, y, 1, r2).grad;
        err += (acc / m - epg.grad).norm();
      }
      return err / reps;
    };
    const double e_small = mean_err(100, 20);
    const double e_big = mean_err(10000, 20);
    CHECK(e_big < e_small);
    const double ratio = e_small / e_big;  // ideal: sqrt(100) = 10
    CHECK(ratio > 3.0);
    CHECK(ratio < 30.0);
  }

  SUBCASE("sampled actions and rewards are exposed") {
    Rng r2(9);
    const ReinforceEstimate est = reinforce_grad(z, y, 3, r2);
    CHECK(est.actions.size() == 15);
    CHECK(est.rewards.size() == 15);
    for (std::size_t i = 0; i < est.actions.size(); ++i) {
      CHECK(est.rewards[i] ==
            reward(y[i / 3], est.actions[i]));
    }
  }
}

TEST_CASE("adaptive epg combination") {
  Rng rng(104);
  const Mat z = random_logits(rng, 4, 6);
  const auto y = random_labels(rng, 4, 6);

  SUBCASE("alpha endpoints reduce to CE / EPG") {
    CHECK(max_abs_diff(aepg_loss(z, y, 1.0).grad, ce_loss(z, y).grad) == 0.0);
    CHECK(max_abs_diff(aepg_loss(z, y, 0.0).grad, epg_loss(z, y).grad) == 0.0);
  }
  SUBCASE("alpha = 0.5 is the exact average of both gradients") {
    const LossOutput mix = aepg_loss(z, y, 0.5);
    const Mat expect = 0.5 * ce_loss(z, y).grad + 0.5 * epg_loss(z, y).grad;
    CHECK(max_abs_diff(mix.grad, expect) < 1e-12);
    CHECK(mix.loss == doctest::Approx(0.5 * ce_loss(z, y).loss +
                                      0.5 * epg_loss(z, y).loss)
                          .epsilon(1e-14));
  }
  SUBCASE("alpha outside [0,1] rejected") {
    CHECK_THROWS_AS(aepg_loss(z, y, -0.1), std::invalid_argument);
    CHECK_THROWS_AS(aepg_loss(z, y, 1.1), std::invalid_argument);
  }
  SUBCASE("matches finite differences at interior alpha") {
    LossSpec spec;
    spec.kind = LossKind::AdaptiveEpg;
    double worst = 0.0;
    Rng r2(105);
    for (int rep = 0; rep < 100; ++rep) {
      const Mat zz = random_logits(r2, 3, 4);
      worst = std::max(worst, fd_on_loss(spec, zz, random_labels(r2, 3, 4),
                                         r2.uniform()));
    }
    CHECK(worst < 1e-5);
  }
}

TEST_CASE("focal loss") {
  SUBCASE("gamma = 0 equals cross entropy") {
    Rng rng(106);
    const Mat z = random_logits(rng, 3, 5);
    const auto y = random_labels(rng, 3, 5);
    CHECK(max_abs_diff(focal_loss(z, y, 0.0).grad, ce_loss(z, y).grad) == 0.0);
  }
  SUBCASE("gamma = 1 at uniform binary logits: loss = 0.5 ln 2") {
    Mat z(1, 2);
    z << 0.0, 0.0;
    CHECK(focal_loss(z, {0}, 1.0).loss ==
          doctest::Approx(0.5 * std::log(2.0)).epsilon(1e-14));
  }
  SUBCASE("matches finite differences at gamma = 2") {
    Rng rng(107);
    LossSpec spec;
    spec.kind = LossKind::Focal;
    spec.gamma = 2.0;
    double worst = 0.0;
    for (int rep = 0; rep < 100; ++rep) {
      const Mat z = random_logits(rng, 3, 5);
      worst = std::max(worst, fd_on_loss(spec, z, random_labels(rng, 3, 5), 1.0));
    }
    CHECK(worst < 1e-5);
  }
}

TEST_CASE("label smoothing loss") {
  Rng rng(108);
  SUBCASE("gamma = 0 equals cross entropy") {
    const Mat z = random_logits(rng, 3, 5);
    const auto y = random_labels(rng, 3, 5);
    CHECK(max_abs_diff(label_smoothing_loss(z, y, 0.0).grad,
                       ce_loss(z, y).grad) == 0.0);
  }
  SUBCASE("the KL(u||p) term vanishes on a uniform prediction") {
    Mat z = Mat::Zero(2, 4);  // uniform softmax
    const std::vector<int> y = {1, 2};
    const double gamma = 0.25;
    CHECK(label_smoothing_loss(z, y, gamma).loss ==
          doctest::Approx((1.0 - gamma) * ce_loss(z, y).loss).epsilon(1e-14));
  }
  SUBCASE("matches finite differences at gamma = 0.1") {
    LossSpec spec;
    spec.kind = LossKind::LabelSmooth;
    spec.gamma = 0.1;
    double worst = 0.0;
    for (int rep = 0; rep < 100; ++rep) {
      const Mat z = random_logits(rng, 3, 5);
      worst = std::max(worst, fd_on_loss(spec, z, random_labels(rng, 3, 5), 1.0));
    }
    CHECK(worst < 1e-5);
  }
}

TEST_CASE("confidence and entropy penalties") {
  Rng rng(109);
  SUBCASE("beta = 0 equals cross entropy") {
    const Mat z = random_logits(rng, 3, 5);
    const auto y = random_labels(rng, 3, 5);
    CHECK(max_abs_diff(confidence_penalty_loss(z, y, 0.0).grad,
                       ce_loss(z, y).grad) == 0.0);
    CHECK(max_abs_diff(entropy_penalty_loss(z, y, 0.0).grad,
                       ce_loss(z, y).grad) == 0.0);
  }
  SUBCASE("uniform prediction, K=4: penalty term is -beta ln 4") {
    Mat z = Mat::Zero(1, 4);
    const double beta = 0.7;
    CHECK(confidence_penalty_loss(z, {0}, beta).loss ==
          doctest::Approx(ce_loss(z, {0}).loss - beta * std::log(4.0))
              .epsilon(1e-14));
  }
  SUBCASE("near-one-hot prediction: entropy term ~ 0") {
    Mat z(1, 3);
    z << 60.0, 0.0, 0.0;
    CHECK(std::abs(entropy_penalty_loss(z, {0}, 1.0).loss -
                   ce_loss(z, {0}).loss) < 1e-12);
  }
  SUBCASE("matches finite differences") {
    LossSpec cp;
    cp.kind = LossKind::ConfidencePenalty;
    cp.beta = 0.1;
    LossSpec ep;
    ep.kind = LossKind::EntropyPenalty;
    ep.beta = 1.0;
    double worst = 0.0;
    for (int rep = 0; rep < 100; ++rep) {
      const Mat z = random_logits(rng, 3, 5);
      const auto y = random_labels(rng, 3, 5);
      worst = std::max(worst, fd_on_loss(cp, z, y, 1.0));
      worst = std::max(worst, fd_on_loss(ep, z, y, 1.0));
    }
    CHECK(worst < 1e-5);
  }
}

TEST_CASE("gradient ratio identity between CE and EPG") {
  SUBCASE("worked binary example") {
    RowVec z(2);
    z << 0.0, 0.0;
    const auto dev = grad_ratio_check(z, 0);
    REQUIRE(dev.has_value());
    CHECK(*dev == doctest::Approx(0.0).epsilon(1e-15));
  }
  SUBCASE("1000 random logits in K=10") {
    Rng rng(110);
    double worst = 0.0;
    for (int rep = 0; rep < 1000; ++rep) {
      RowVec z(10);
      for (int j = 0; j < 10; ++j) z[j] = rng.normal(0.0, 2.0);
      const auto dev = grad_ratio_check(z, static_cast<int>(rng.below(10)));
      REQUIRE(dev.has_value());
      worst = std::max(worst, *dev);
    }
    CHECK(worst < 1e-10);
  }
  SUBCASE("near-one-hot logits still satisfy the identity") {
    RowVec z(4);
    z << 25.0, 0.0, 0.0, 0.0;
    const auto dev = grad_ratio_check(z, 0);
    REQUIRE(dev.has_value());
    CHECK(*dev < 1e-10);
  }
  SUBCASE("vanishing p(y) is reported as skipped, not failure") {
    RowVec z(3);
    z << 0.0, 60.0, 0.0;  // p(y=0) ~ e^-60
    CHECK_FALSE(grad_ratio_check(z, 0).has_value());
  }
}

TEST_CASE("per-sample gradient magnitude ordering |g_EPG| = p(y) |g_CE|") {
  Rng rng(111);
  for (int rep = 0; rep < 200; ++rep) {
    Mat z = random_logits(rng, 1, 8, 2.0);
    const int y = static_cast<int>(rng.below(8));
    const Mat p = softmax_rows(z);
    const LossOutput ce = ce_loss(z, {y});
    const LossOutput epg = epg_loss(z, {y});
    CHECK(epg.grad.norm() ==
          doctest::Approx(p(0, y) * ce.grad.norm()).epsilon(1e-12));
    CHECK(epg.grad.norm() <= ce.grad.norm() + 1e-15);
  }
}

TEST_CASE("tape expressions agree with the analytic gradients") {
  Rng rng(112);
  const Mat z = random_logits(rng, 4, 5);
  const auto y = random_labels(rng, 4, 5);
  const double alpha = 0.3;

  for (LossKind kind :
       {LossKind::CrossEntropy, LossKind::Epg, LossKind::AdaptiveEpg,
        LossKind::Reinforce, LossKind::Focal, LossKind::LabelSmooth,
        LossKind::ConfidencePenalty, LossKind::EntropyPenalty}) {
    LossSpec spec;
    spec.kind = kind;
    spec.gamma = kind == LossKind::LabelSmooth ? 0.1 : 2.0;
    spec.beta = 0.5;

    Tape t;
    Var zv = t.leaf(z);
    Var loss = loss_expr(spec, zv, y, alpha);
    t.backward(loss);

    Rng unused(0);
    LossSpec analytic_spec = spec;
    if (analytic_spec.kind == LossKind::Reinforce) {
      // tape form is the enumeration estimator, i.e. the EPG loss
      analytic_spec.kind = LossKind::Epg;
    }
    const LossOutput out = eval_loss(analytic_spec, z, y, alpha, &unused);
    CHECK(std::abs(t.value(loss)(0, 0) - out.loss) < 1e-12);
    CHECK(max_abs_diff(t.grad(zv), out.grad) < 1e-11);
  }
}

TEST_CASE("loss kind strings round-trip") {
  for (LossKind k :
       {LossKind::CrossEntropy, LossKind::Epg, LossKind::AdaptiveEpg,
        LossKind::Reinforce, LossKind::Focal, LossKind::LabelSmooth,
        LossKind::ConfidencePenalty, LossKind::EntropyPenalty}) {
    CHECK(loss_kind_from_string(to_string(k)) == k);
  }
  CHECK_THROWS_AS(loss_kind_from_string("nope"), std::invalid_argument);
}
