#ifndef PIDSTEER_CONTROLLER_HPP
#define PIDSTEER_CONTROLLER_HPP

// P/PI/PID steering laws. The controller state is a plain value threaded
// through the step loop; control() is the discretized law
//   u(k) = kp*e(k) + ki*sum_{j<k} e(j) + kd*(e(k) - e(k-1)),
// with the e(-1) = 0 convention, so the derivative term at k = 0 is kd*e(0).

#include <cmath>
#include <utility>

#include "pidsteer/errors.hpp"
#include "pidsteer/linalg.hpp"

namespace pidsteer {

/// Scalar gains; each acts as a scalar multiple of the identity.
struct Gains {
  double kp = 0.0;
  double ki = 0.0;
  double kd = 0.0;

  Gains() = default;
  Gains(double p, double i, double d) : kp(p), ki(i), kd(d) {
    if (kp < 0 || ki < 0 || kd < 0 || !std::isfinite(kp) ||
        !std::isfinite(ki) || !std::isfinite(kd))
      throw InvalidInputError("gains must be finite and non-negative");
  }
};

struct ControllerState {
  Gains gains;
  Vec integrator;  // s(k) = sum_{j<k} e(j)
  Vec prev_error;  // e(k-1), zero at k = 0
  long step = 0;

  ControllerState(Gains g, Eigen::Index dim)
      : gains(g), integrator(Vec::Zero(dim)), prev_error(Vec::Zero(dim)) {}

  /// Emits u(k) for the error e(k) and absorbs e(k) into the state.
  Vec control(const Vec& e) {
    if (e.size() != integrator.size())
      throw InvalidInputError("control: error dimension mismatch");
    if (!e.allFinite())
      throw InvalidInputError("control: non-finite error");
    Vec u = gains.kp * e + gains.ki * integrator +
            gains.kd * (e - prev_error);
    integrator += e;
    prev_error = e;
    ++step;
    return u;
  }
};

struct SteerFn {
  enum class Kind { add, directional_ablation };
  Kind kind = Kind::add;
  double alpha = 1.0;  // strength, add only
};

/// rho_steer: add -> x + alpha*u; directional-ablation -> remove the
/// component of x along u (u normalized internally).
inline Vec apply_steer(const SteerFn& fn, const Vec& x, const Vec& u) {
  if (x.size() != u.size())
    throw InvalidInputError("apply_steer: dimension mismatch");
  switch (fn.kind) {
    case SteerFn::Kind::add:
      return x + fn.alpha * u;
    case SteerFn::Kind::directional_ablation: {
      const double n = u.norm();
      if (n < 1e-12)
        throw DegenerateDirectionError("apply_steer: zero steering direction");
      const Vec uhat = u / n;
      return x - uhat * uhat.dot(x);
    }
  }
  throw InvalidInputError("apply_steer: unknown steer kind");
}

}  // namespace pidsteer

#endif  // PIDSTEER_CONTROLLER_HPP
