#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "epgrad/schedule.hpp"

using namespace epgrad;

namespace {

double round4(double v) { return std::round(v * 1e4) / 1e4; }

AnnealState make(ScheduleKind kind, long T, double tau = 6.0) {
  AnnealState s;
  s.kind = kind;
  s.tau = tau;
  s.T = T;
  return s;
}

}  // namespace

TEST_CASE("sigmoid endpoints match the published table to 4 decimals") {
  struct Row {
    double tau, start, end;
  };
  const Row rows[] = {{4.0, 0.9820, 0.0180},
                      {6.0, 0.9975, 0.0025},
                      {8.0, 0.9997, 0.0003}};
  for (const Row& r : rows) {
    AnnealState s = make(ScheduleKind::Sigmoid, 500, r.tau);
    s.t = 0;
    CHECK(round4(alpha(s)) == r.start);
    s.t = s.T;
    CHECK(round4(alpha(s)) == r.end);
  }
}

TEST_CASE("all decaying schedules cross 0.5 at the midpoint") {
  for (ScheduleKind k :
       {ScheduleKind::Sigmoid, ScheduleKind::Linear, ScheduleKind::Cosine}) {
    AnnealState s = make(k, 100);
    s.t = 50;
    CHECK(alpha(s) == doctest::Approx(0.5).epsilon(1e-12));
  }
}

TEST_CASE("alpha is monotone non-increasing and bounded in [0,1]") {
  for (ScheduleKind k :
       {ScheduleKind::Sigmoid, ScheduleKind::Linear, ScheduleKind::Cosine,
        ScheduleKind::Constant}) {
    AnnealState s = make(k, 237);
    s.value = 0.4;
    double prev = 2.0;
    for (long t = 0; t <= s.T; ++t) {
      s.t = t;
      const double a = alpha(s);
      CHECK(a >= 0.0);
      CHECK(a <= 1.0);
      CHECK(a <= prev);
      prev = a;
    }
  }
}

TEST_CASE("advance walks to T and clamps there") {
  AnnealState s = make(ScheduleKind::Linear, 10);
  for (int i = 0; i < 10; ++i) advance(s);
  CHECK(s.t == 10);
  CHECK(alpha(s) == 0.0);
  advance(s);  // past the horizon: alpha stays alpha_T, no error
  CHECK(s.t == 10);
  CHECK(alpha(s) == 0.0);
}

TEST_CASE("per-task scope resets, global scope does not") {
  AnnealState per = make(ScheduleKind::Sigmoid, 10);
  per.scope = ScheduleScope::PerTask;
  for (int i = 0; i < 10; ++i) advance(per);
  const double at_end = alpha(per);
  reset_for_task(per, 20);
  CHECK(per.t == 0);
  CHECK(per.T == 20);
  CHECK(alpha(per) > at_end);
  CHECK(alpha(per) == doctest::Approx(1.0 / (1.0 + std::exp(-6.0))));

  AnnealState glob = make(ScheduleKind::Sigmoid, 10);
  glob.scope = ScheduleScope::Global;
  for (int i = 0; i < 7; ++i) advance(glob);
  reset_for_task(glob, 20);
  CHECK(glob.t == 7);
  CHECK(glob.T == 10);
}

TEST_CASE("zero horizon is rejected") {
  AnnealState s = make(ScheduleKind::Linear, 0);
  CHECK_THROWS_AS(alpha(s), std::invalid_argument);
}

TEST_CASE("kind and scope string round-trips") {
  for (ScheduleKind k :
       {ScheduleKind::Sigmoid, ScheduleKind::Linear, ScheduleKind::Cosine,
        ScheduleKind::Constant}) {
    CHECK(schedule_kind_from_string(to_string(k)) == k);
  }
  CHECK_THROWS_AS(schedule_kind_from_string("bogus"), std::invalid_argument);
  CHECK(schedule_scope_from_string("global") == ScheduleScope::Global);
}
