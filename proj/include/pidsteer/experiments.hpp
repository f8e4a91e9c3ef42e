#ifndef PIDSTEER_EXPERIMENTS_HPP
#define PIDSTEER_EXPERIMENTS_HPP

// Higher-level runs shared by the CLI and the acceptance suite:
// trajectory capture, bound measurement, the P/PI/PID figure pipeline
// and a deterministic worker pool for ensembles.

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <functional>
#include <string>
#include <thread>
#include <vector>

#include "pidsteer/analysis.hpp"
#include "pidsteer/plant.hpp"
#include "pidsteer/steering.hpp"
#include "pidsteer/trace.hpp"

namespace pidsteer {
namespace experiments {

/// Re-packages the (A(k), w(k)) pairs recorded in a closed-loop trace so
/// the linearized model can be replayed over them.
inline LinearizedTrajectory trajectory_from_trace(const Trace& trace) {
  LinearizedTrajectory traj;
  traj.reserve(trace.steps.size());
  for (const auto& st : trace.steps) traj.push_back({st.a_bar, st.w});
  return traj;
}

inline LinearizedTrajectory constant_trajectory(const Mat& a_bar,
                                                const Vec& w, long steps) {
  return LinearizedTrajectory(steps, TrajectoryStep{a_bar, w});
}

struct MeasuredBounds {
  double m_bound = 0;  // sup_k ||A(k)||
  double q = 0;        // sup_k ||A(k)(1 - kp)||
  double w_inf = 0;    // sup_k ||w(k)||
  double d_inf = 0;    // sup_k ||s*(k+1) - s*(k)|| projected proxy
};

inline MeasuredBounds measure_bounds(const Trace& trace) {
  MeasuredBounds out;
  for (const auto& st : trace.steps) {
    const double an = linalg::spectral_norm(st.a_bar);
    out.m_bound = std::max(out.m_bound, an);
    out.q = std::max(out.q, std::abs(1.0 - trace.gains.kp) * an);
    out.w_inf = std::max(out.w_inf, st.w.norm());
  }
  return out;
}

/// <e(0), e(k)> series, final state included.
inline std::vector<double> energy_series(const Trace& trace) {
  std::vector<double> out;
  const Vec e0 = trace.steps.front().e_bar;
  for (const auto& st : trace.steps) out.push_back(e0.dot(st.e_bar));
  out.push_back(e0.dot(trace.final_error));
  return out;
}

struct FigureData {
  Trace trace_p, trace_pi, trace_pid;
  std::vector<double> energy_p, energy_pi, energy_pid;
};

/// Runs the same plant under P, PI and PID sequential steering and
/// collects the energy-along-e(0) series for each.
inline FigureData run_figure(const ContrastivePlant& plant, const Gains& gp,
                             const Gains& gpi, const Gains& gpid,
                             const SteerFn& steer) {
  FigureData out;
  out.trace_p =
      steering_vectors_sequential(plant, ControllerState(gp, plant.dim), steer)
          .second;
  out.trace_pi =
      steering_vectors_sequential(plant, ControllerState(gpi, plant.dim),
                                  steer)
          .second;
  out.trace_pid =
      steering_vectors_sequential(plant, ControllerState(gpid, plant.dim),
                                  steer)
          .second;
  out.energy_p = energy_series(out.trace_p);
  out.energy_pi = energy_series(out.trace_pi);
  out.energy_pid = energy_series(out.trace_pid);
  return out;
}

inline unsigned worker_count() {
  unsigned n = std::max(1u, std::thread::hardware_concurrency());
  if (const char* env = std::getenv("PIDSTEER_THREADS")) {
    const long cap = std::strtol(env, nullptr, 10);
    if (cap >= 1) n = std::min<unsigned>(n, static_cast<unsigned>(cap));
  }
  return n;
}

/// Runs fn(i) for i in [0, n) on a small worker pool. Each index is
/// independent; callers collect results into pre-sized arrays so output
/// ordering stays deterministic.
inline void parallel_for(long n, const std::function<void(long)>& fn) {
  const unsigned workers = std::min<unsigned>(worker_count(),
                                              static_cast<unsigned>(n));
  if (workers <= 1) {
    for (long i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  std::atomic<long> next{0};
  for (unsigned t = 0; t < workers; ++t)
    pool.emplace_back([&] {
      for (long i = next.fetch_add(1); i < n; i = next.fetch_add(1)) fn(i);
    });
  for (auto& th : pool) th.join();
}

}  // namespace experiments
}  // namespace pidsteer

#endif  // PIDSTEER_EXPERIMENTS_HPP
