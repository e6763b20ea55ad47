// Annealing coefficient alpha_t: sigmoid (default), linear, cosine, constant.
// All decaying kinds are monotone non-increasing on t in [0, T] and pass
// through 0.5 at t = T/2.
#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace epgrad {

enum class ScheduleKind { Sigmoid, Linear, Cosine, Constant };
enum class ScheduleScope { PerTask, Global };

ScheduleKind schedule_kind_from_string(const std::string& s);
ScheduleScope schedule_scope_from_string(const std::string& s);
std::string to_string(ScheduleKind k);
std::string to_string(ScheduleScope s);

struct AnnealState {
  ScheduleKind kind = ScheduleKind::Sigmoid;
  double tau = 6.0;     // sigmoid sharpness
  double value = 1.0;   // constant kind only
  long t = 0;           // current step
  long T = 1;           // step budget of the current scope
  ScheduleScope scope = ScheduleScope::PerTask;
};

// alpha_t for the current step. Sigmoid: sigma(tau * (T - 2t) / T);
// linear: (T - t) / T; cosine: 1/2 + 1/2 cos(pi t / T). Throws on T <= 0.
double alpha(const AnnealState& s);

// Advances t by one; past T it sticks at T so alpha clamps at alpha_T.
void advance(AnnealState& s);

// Per-task scope restarts the schedule at each task boundary; global scope
// keeps counting.
void reset_for_task(AnnealState& s, long task_steps);

}  // namespace epgrad
