#ifndef PIDSTEER_TRACE_HPP
#define PIDSTEER_TRACE_HPP

// Per-step record of a closed-loop run. One TraceStep per layer transition
// k -> k+1 holds the quantities entering the state-space model at step k;
// the state reached after the last transition is kept in Trace::final_error.

#include <vector>

#include "pidsteer/controller.hpp"
#include "pidsteer/linalg.hpp"

namespace pidsteer {

struct TraceStep {
  long k = 0;
  Vec e_bar;        // error entering step k
  Vec u;            // control applied at step k
  Vec w;            // disturbance at step k
  Vec s;            // integrator state s(k) = sum_{j<k} e_bar(j)
  Mat a_bar;        // mean Jacobian at step k
};

struct Trace {
  Gains gains;
  std::vector<TraceStep> steps;
  Vec final_error;  // e_bar after the last recorded step

  /// e_bar(k) for k = 0..steps.size(), final state included.
  std::vector<Vec> error_series() const {
    std::vector<Vec> out;
    out.reserve(steps.size() + 1);
    for (const auto& st : steps) out.push_back(st.e_bar);
    out.push_back(final_error);
    return out;
  }
};

/// One step of a linearized trajectory: the mean Jacobian and the
/// disturbance, either captured from a plant rollout or synthesized.
struct TrajectoryStep {
  Mat a_bar;
  Vec w;
};

using LinearizedTrajectory = std::vector<TrajectoryStep>;

}  // namespace pidsteer

#endif  // PIDSTEER_TRACE_HPP
