#include "epgrad/schedule.hpp"

#include <cmath>

namespace epgrad {

ScheduleKind schedule_kind_from_string(const std::string& s) {
  if (s == "sigmoid") return ScheduleKind::Sigmoid;
  if (s == "linear") return ScheduleKind::Linear;
  if (s == "cosine") return ScheduleKind::Cosine;
  if (s == "constant") return ScheduleKind::Constant;
  throw std::invalid_argument("unknown schedule kind: " + s);
}

ScheduleScope schedule_scope_from_string(const std::string& s) {
  if (s == "per_task") return ScheduleScope::PerTask;
  if (s == "global") return ScheduleScope::Global;
  throw std::invalid_argument("unknown schedule scope: " + s);
}

std::string to_string(ScheduleKind k) {
  switch (k) {
    case ScheduleKind::Sigmoid: return "sigmoid";
    case ScheduleKind::Linear: return "linear";
    case ScheduleKind::Cosine: return "cosine";
    case ScheduleKind::Constant: return "constant";
  }
  return "?";
}

std::string to_string(ScheduleScope s) {
  return s == ScheduleScope::PerTask ? "per_task" : "global";
}

double alpha(const AnnealState& s) {
  if (s.T <= 0) throw std::invalid_argument("alpha: schedule horizon T must be > 0");
  const double t = static_cast<double>(s.t);
  const double T = static_cast<double>(s.T);
  switch (s.kind) {
    case ScheduleKind::Sigmoid: {
      const double x = s.tau * (T - 2.0 * t) / T;
      return 1.0 / (1.0 + std::exp(-x));
    }
    case ScheduleKind::Linear:
      return (T - t) / T;
    case ScheduleKind::Cosine:
      return 0.5 + 0.5 * std::cos(M_PI * t / T);
    case ScheduleKind::Constant:
      return s.value;
  }
  return s.value;
}

void advance(AnnealState& s) {
  if (s.t < s.T) ++s.t;
}

void reset_for_task(AnnealState& s, long task_steps) {
  if (s.scope == ScheduleScope::PerTask) {
    s.t = 0;
    s.T = task_steps;
  }
}

}  // namespace epgrad
