#ifndef PIDSTEER_STEERING_HPP
#define PIDSTEER_STEERING_HPP

// Steering-vector construction on the exact plant. Non-sequential: the
// per-layer difference-in-means of two unsteered rollouts. Sequential:
// the closed loop that applies u(k-1) on the minus branch, steps both
// branches, recomputes the difference-in-means from the steered states
// and feeds it back into the controller.

#include <utility>
#include <vector>

#include "pidsteer/controller.hpp"
#include "pidsteer/plant.hpp"
#include "pidsteer/trace.hpp"

namespace pidsteer {

/// Unsteered rollout of both branches; returns states per layer,
/// index 0 holding the initial states.
inline std::pair<std::vector<std::vector<Vec>>, std::vector<std::vector<Vec>>>
rollout_unsteered(const ContrastivePlant& plant) {
  plant.validate();
  std::vector<std::vector<Vec>> plus{plant.initial_plus};
  std::vector<std::vector<Vec>> minus{plant.initial_minus};
  const Vec zero = Vec::Zero(plant.dim);
  for (long k = 0; k < plant.layer_count(); ++k) {
    auto [np, nm] = step_exact(plant, plus.back(), minus.back(), zero, k);
    plus.push_back(std::move(np));
    minus.push_back(std::move(nm));
  }
  return {std::move(plus), std::move(minus)};
}

/// r(k) = mean(x^+(k)) - mean(x^-(k)) per layer, from trajectories
/// recorded without intervention.
inline std::vector<Vec> steering_vectors_nonsequential(
    const std::vector<std::vector<Vec>>& plus_traj,
    const std::vector<std::vector<Vec>>& minus_traj) {
  if (plus_traj.size() != minus_traj.size() || plus_traj.empty())
    throw InvalidInputError("nonsequential: trajectory length mismatch");
  std::vector<Vec> r;
  r.reserve(plus_traj.size());
  for (size_t k = 0; k < plus_traj.size(); ++k)
    r.push_back(average_error(plus_traj[k], minus_traj[k]));
  return r;
}

/// Closed-loop sequential steering. Returns the per-layer steering signals
/// r(k) (k = 0..K) and the full trace; trace.steps[k] records the local
/// model at the steered states.
inline std::pair<std::vector<Vec>, Trace> steering_vectors_sequential(
    const ContrastivePlant& plant, ControllerState controller,
    const SteerFn& steer) {
  plant.validate();
  if (controller.integrator.size() != plant.dim)
    throw InvalidInputError("sequential: controller dimension mismatch");
  std::vector<Vec> plus = plant.initial_plus;
  std::vector<Vec> minus = plant.initial_minus;
  std::vector<Vec> r_list;
  Trace trace;
  trace.gains = controller.gains;
  for (long k = 0; k < plant.layer_count(); ++k) {
    PlantStep lm = local_model(plant, plus, minus, k);
    Vec r = lm.e_bar;
    r_list.push_back(r);
    TraceStep st;
    st.k = k;
    st.e_bar = r;
    st.s = controller.integrator;
    st.u = controller.control(r);
    st.w = lm.disturbance;
    st.a_bar = lm.mean_jacobian;
    // Steer the minus branch, then step both branches through layer k.
    std::vector<Vec> steered(minus.size());
    for (size_t i = 0; i < minus.size(); ++i)
      steered[i] = apply_steer(steer, minus[i], st.u);
    std::vector<Vec> next_plus(plus.size()), next_minus(minus.size());
    for (int i = 0; i < plant.pairs; ++i) {
      next_plus[i] = plant.layers[k][i].apply(plus[i]);
      next_minus[i] = plant.layers[k][i].apply(steered[i]);
    }
    plus = std::move(next_plus);
    minus = std::move(next_minus);
    for (const auto& x : minus)
      if (!x.allFinite())
        throw DivergenceError("sequential steering diverged", k + 1);
    trace.steps.push_back(std::move(st));
  }
  Vec r_final = average_error(plus, minus);
  r_list.push_back(r_final);
  trace.final_error = r_final;
  return {std::move(r_list), std::move(trace)};
}

}  // namespace pidsteer

#endif  // PIDSTEER_STEERING_HPP
