#ifndef PIDSTEER_ORACLE_HPP
#define PIDSTEER_ORACLE_HPP

// Independent brute-force validators. Everything here is a deliberately
// naive reimplementation that shares no code with the module it checks;
// performance does not matter.

#include <cmath>
#include <utility>
#include <vector>

#include "pidsteer/controller.hpp"
#include "pidsteer/plant.hpp"
#include "pidsteer/trace.hpp"

namespace pidsteer {
namespace oracle {

struct FdJacobianConfig {
  double step = 1e-6;  // central-difference step
};

/// Central-difference Jacobian of a layer map.
inline Mat fd_jacobian(const LayerMap& map, const Vec& x,
                       const FdJacobianConfig& cfg = {}) {
  if (cfg.step <= 0) throw InvalidInputError("fd_jacobian: step must be > 0");
  const Eigen::Index d = x.size();
  Mat jac(d, d);
  for (Eigen::Index j = 0; j < d; ++j) {
    Vec xp = x, xm = x;
    xp(j) += cfg.step;
    xm(j) -= cfg.step;
    jac.col(j) = (map.apply(xp) - map.apply(xm)) / (2.0 * cfg.step);
  }
  return jac;
}

/// Straight-line closed-loop rollout with the PID arithmetic written out
/// inline; reference for steering_vectors_sequential.
inline Trace naive_rollout(const ContrastivePlant& plant, const Gains& gains,
                           const SteerFn& steer) {
  plant.validate();
  const Eigen::Index d = plant.dim;
  std::vector<Vec> plus = plant.initial_plus;
  std::vector<Vec> minus = plant.initial_minus;
  Vec integral = Vec::Zero(d);
  Vec prev_r = Vec::Zero(d);
  Trace trace;
  trace.gains = gains;
  for (long k = 0; k < plant.layer_count(); ++k) {
    // difference in means
    Vec mp = Vec::Zero(d), mm = Vec::Zero(d);
    for (int i = 0; i < plant.pairs; ++i) {
      mp += plus[i];
      mm += minus[i];
    }
    Vec r = (mp - mm) / plant.pairs;
    Vec u = gains.kp * r + gains.ki * integral + gains.kd * (r - prev_r);

    // local model, naive sums
    Mat a_bar = Mat::Zero(d, d);
    std::vector<Mat> jac(plant.pairs);
    for (int i = 0; i < plant.pairs; ++i) {
      jac[i] = plant.layers[k][i].jacobian(plus[i]);
      a_bar += jac[i];
    }
    a_bar /= plant.pairs;
    Vec w = Vec::Zero(d);
    for (int i = 0; i < plant.pairs; ++i)
      w += (jac[i] - a_bar) * ((plus[i] - minus[i]) - r);
    w /= plant.pairs;

    TraceStep st;
    st.k = k;
    st.e_bar = r;
    st.s = integral;
    st.u = u;
    st.w = w;
    st.a_bar = a_bar;
    trace.steps.push_back(st);

    integral += r;
    prev_r = r;

    for (int i = 0; i < plant.pairs; ++i) {
      Vec steered;
      if (steer.kind == SteerFn::Kind::add) {
        steered = minus[i] + steer.alpha * u;
      } else {
        Vec uhat = u / u.norm();
        steered = minus[i] - uhat * uhat.dot(minus[i]);
      }
      minus[i] = plant.layers[k][i].apply(steered);
      plus[i] = plant.layers[k][i].apply(plus[i]);
    }
  }
  Vec mp = Vec::Zero(d), mm = Vec::Zero(d);
  for (int i = 0; i < plant.pairs; ++i) {
    mp += plus[i];
    mm += minus[i];
  }
  trace.final_error = (mp - mm) / plant.pairs;
  return trace;
}

/// Grid search for the integral gain minimizing the spectral radius of the
/// comparison matrix [[q, M h],[1, 1]]. The 2x2 eigenvalues are computed
/// from the quadratic formula directly.
inline std::pair<double, double> grid_min_radius(
    double q, double m_bound, const std::vector<double>& h_grid) {
  if (h_grid.empty()) throw InvalidInputError("grid_min_radius: empty grid");
  auto radius = [&](double h) {
    // lambda^2 - (q+1) lambda + (q + M h) = 0
    const double b = q + 1.0, c = q + m_bound * h;
    const double disc = b * b - 4.0 * c;
    if (disc >= 0) {
      const double s = std::sqrt(disc);
      return std::max(std::abs((b + s) / 2.0), std::abs((b - s) / 2.0));
    }
    return std::sqrt(c);  // complex pair, modulus sqrt(det)
  };
  double h_best = h_grid[0];
  double r_best = radius(h_best);
  for (double h : h_grid) {
    const double r = radius(h);
    if (r < r_best) {
      r_best = r;
      h_best = h;
    }
  }
  return {h_best, r_best};
}

}  // namespace oracle
}  // namespace pidsteer

#endif  // PIDSTEER_ORACLE_HPP
