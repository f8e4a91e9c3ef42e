#ifndef PIDSTEER_ANALYSIS_HPP
#define PIDSTEER_ANALYSIS_HPP

// Certificates, bounds and diagnostics for the P/PI/PID closed loops:
// ISS envelopes, the 2x2 comparison system and its Gelfand envelope,
// optimal integral gain, scalarized traces, overshoot detection and the
// first-overshoot bound, the derivative-gain threshold, and the PID
// Lyapunov certificate.

#include <cmath>
#include <limits>
#include <optional>
#include <vector>

#include "pidsteer/controller.hpp"
#include "pidsteer/errors.hpp"
#include "pidsteer/linalg.hpp"
#include "pidsteer/trace.hpp"

namespace pidsteer {

struct StabilityCertificate {
  double m_bound = 0;   // sup_k ||A(k)||
  double q = 0;         // sup_k ||M_P(k)||
  double h = 0;         // ||K_i||
  double ell = 0;       // ||K_d||
  double rho = 1;       // chosen decay rate in (radius, 1)
  double c_const = 0;   // Gelfand constant
  bool iss = false;
};

struct ScalarTrace {
  Vec v;                       // unit reference direction e(0)/||e(0)||
  std::vector<double> e_v;     // <v, e(k)>, final state included
  std::vector<double> s_v;     // <v, s~(k)>  (integrator minus s*)
  std::vector<double> s_raw_v; // <v, s(k)>   (raw prefix sum)
  std::vector<double> a;       // v^T M_P(k) v
  std::vector<double> b;       // v^T G(k) v
  std::vector<double> c;       // v^T H(k) v
  std::vector<double> w_v_perp;
  std::vector<double> d_v;
  double min_jacobian_projection = 0;  // min_k v^T A(k) v, reported not enforced
};

struct OvershootEvent {
  long start = 0;      // first negative index
  long length = 0;     // number of consecutive negative steps
  double amplitude = 0;
};

struct FirstOvershoot {
  long t0 = 0;     // first sign-change time
  long t1 = 0;     // first return to the nonnegative side
  long i_max = 0;  // argmax |e_v| within [t0, t1-1]
  double a0 = 0;
};

struct OvershootReport {
  std::vector<OvershootEvent> events;
  std::optional<FirstOvershoot> first;
};

struct LyapunovCertificate {
  Mat p_matrix;  // may be empty when built from norms alone
  Mat q_matrix;
  double mu = 0;
  double r_weight = 0;
  double epsilon = 0;
  double s_margin = 0;
  double t_margin = 0;
  double admissible_ell_sq = 0;
  bool valid = false;
};

struct LiftedMatrices {
  Mat m_p;   // A(I - K_p)
  Mat g;     // A K_i
  Mat hmat;  // A K_d
  Mat m_i;   // PI lifted block matrix
  Mat m_d;   // PID lifted block matrix
};

namespace analysis {

/// Per-step ISS envelope of the P loop: q^k e0 + (1-q^k)/(1-q) w_inf.
inline double p_envelope(double q, double w_inf, double e0_norm, long k) {
  if (q < 0 || q >= 1.0)
    throw UnstableSystemError("p_envelope: need 0 <= q < 1");
  const double qk = std::pow(q, static_cast<double>(k));
  return qk * e0_norm + (1.0 - qk) / (1.0 - q) * w_inf;
}

/// Steady state of the P loop under constant disturbance:
/// (I - A(1 - kp))^-1 w.
inline Vec steady_state_error(const Mat& a_bar, double kp, const Vec& w) {
  linalg::require_finite(a_bar, "a_bar");
  linalg::require_finite(w, "w");
  Mat m_p = (1.0 - kp) * a_bar;
  if (linalg::spectral_radius(m_p) >= 1.0)
    throw UnstableSystemError("steady_state_error: P loop not contracting");
  Mat sys = Mat::Identity(a_bar.rows(), a_bar.cols()) - m_p;
  Eigen::FullPivLU<Mat> lu(sys);
  if (lu.rcond() < 1e-14)
    throw NearSingularError("steady_state_error: I - M_P nearly singular");
  return lu.solve(w);
}

/// The 2x2 comparison matrix of the PI pair: the scalar closed-loop
/// matrix [[q, -M h],[1, 1]], whose characteristic polynomial is
/// lambda^2 - (q+1) lambda + (q + M h). Its spectral radius is < 1
/// exactly when q + M h < 1.
inline Mat pi_comparison_matrix(double q, double m_bound, double h) {
  if (q < 0 || m_bound < 0 || h < 0)
    throw InvalidInputError("pi_comparison_matrix: negative argument");
  Mat m(2, 2);
  m << q, -m_bound * h, 1.0, 1.0;
  return m;
}

inline int constexpr kGelfandScanHorizon = 500;

/// ISS check for the PI loop: q + M h < 1. When it holds, packages the
/// decay rate rho = (radius+1)/2 and the Gelfand constant C with
/// ||H^k|| <= C rho^k for all k.
inline StabilityCertificate certify_pi(double m_bound, double q, double h) {
  StabilityCertificate cert;
  cert.m_bound = m_bound;
  cert.q = q;
  cert.h = h;
  cert.iss = (q + m_bound * h < 1.0);
  if (cert.iss) {
    Mat comp = pi_comparison_matrix(q, m_bound, h);
    const double radius = linalg::spectral_radius(comp);
    cert.rho = 0.5 * (radius + 1.0);
    cert.c_const = linalg::gelfand_constant(comp, cert.rho,
                                            kGelfandScanHorizon);
  }
  return cert;
}

/// Integral gain minimizing the comparison-system decay rate:
/// h* = (1-q)^2 / (4 M); the radius there is (1+q)/2.
inline double optimal_integral_gain(double q, double m_bound) {
  if (q < 0 || q >= 1.0 || m_bound <= 0)
    throw InvalidInputError("optimal_integral_gain: need 0 <= q < 1, M > 0");
  return (1.0 - q) * (1.0 - q) / (4.0 * m_bound);
}

/// Projects a closed-loop trace onto v = e(0)/||e(0)||: the scalar PI/PID
/// pair, its coefficients and the projected disturbances. The integral
/// shift s*(k) uses pinv(A(k)) on the matched disturbance component and
/// needs ki > 0; with ki = 0 there is no integral state to shift.
inline ScalarTrace scalarize(const Trace& trace) {
  if (trace.steps.empty())
    throw InsufficientTraceError("scalarize: empty trace");
  const Vec& e0 = trace.steps.front().e_bar;
  const double e0n = e0.norm();
  if (e0n < 1e-12)
    throw DegenerateInitialErrorError("scalarize: ||e(0)|| ~ 0");
  ScalarTrace out;
  out.v = e0 / e0n;
  const Gains& g = trace.gains;
  const long n = static_cast<long>(trace.steps.size());
  std::vector<Vec> s_star(n);
  out.min_jacobian_projection = std::numeric_limits<double>::infinity();
  for (long k = 0; k < n; ++k) {
    const TraceStep& st = trace.steps[k];
    auto [w_par, w_perp] = linalg::orthogonal_decompose(st.w, st.a_bar);
    s_star[k] = (g.ki > 0) ? Vec((1.0 / g.ki) * (linalg::pinv(st.a_bar) * w_par))
                           : Vec(Vec::Zero(st.w.size()));
    const double vav = out.v.dot(st.a_bar * out.v);
    out.min_jacobian_projection = std::min(out.min_jacobian_projection, vav);
    out.e_v.push_back(out.v.dot(st.e_bar));
    out.s_raw_v.push_back(out.v.dot(st.s));
    out.s_v.push_back(out.v.dot(st.s - s_star[k]));
    out.a.push_back((1.0 - g.kp) * vav);
    out.b.push_back(g.ki * vav);
    out.c.push_back(g.kd * vav);
    out.w_v_perp.push_back(out.v.dot(w_perp));
  }
  for (long k = 0; k < n; ++k) {
    Vec d = (k + 1 < n) ? Vec(s_star[k + 1] - s_star[k])
                        : Vec(Vec::Zero(s_star[k].size()));
    out.d_v.push_back(out.v.dot(d));
  }
  out.e_v.push_back(out.v.dot(trace.final_error));
  return out;
}

/// Scans the scalar trace for overshoot events: maximal runs of negative
/// e_v bracketed by nonnegative values on both sides.
inline OvershootReport detect_overshoots(const ScalarTrace& s) {
  OvershootReport report;
  const auto& e = s.e_v;
  const long n = static_cast<long>(e.size());
  long k = 0;
  while (k < n) {
    if (e[k] >= 0) {
      ++k;
      continue;
    }
    long start = k;
    while (k < n && e[k] < 0) ++k;
    if (start == 0 || k == n) continue;  // not bracketed, incomplete
    OvershootEvent ev;
    ev.start = start;
    ev.length = k - start;
    long arg = start;
    for (long i = start; i < k; ++i)
      if (std::abs(e[i]) > std::abs(e[arg])) arg = i;
    ev.amplitude = std::abs(e[arg]);
    if (!report.first) {
      FirstOvershoot f;
      f.t0 = start;
      f.t1 = k;
      f.i_max = arg;
      f.a0 = ev.amplitude;
      report.first = f;
    }
    report.events.push_back(ev);
  }
  return report;
}

/// Worst-case first-overshoot amplitude of the scalar PI loop:
///   Mh (1/(1-q) + 1/(1-q)^2) e_v(0)
/// + (Mh/(1-q) (t0-1) + Mh/(1-q)) ||d||_inf
/// + (Mh (t0-1) + 1)/(1-q) ||w||_inf.
/// The factor (t0 - 1) is clamped at zero.
inline double first_overshoot_bound(const StabilityCertificate& cert,
                                    double e_v0, long t0, double d_inf,
                                    double w_inf) {
  if (cert.q >= 1.0)
    throw UnstableSystemError("first_overshoot_bound: q >= 1");
  if (!cert.iss)
    throw InvalidCertificateError("first_overshoot_bound: not ISS");
  if (e_v0 < 0)
    throw InvalidInputError("first_overshoot_bound: e_v(0) must be >= 0");
  const double mh = cert.m_bound * cert.h;
  const double omq = 1.0 - cert.q;
  const double t0m1 = std::max<double>(0.0, static_cast<double>(t0 - 1));
  return mh * (1.0 / omq + 1.0 / (omq * omq)) * e_v0 +
         (mh / omq * t0m1 + mh / omq) * d_inf +
         (mh * t0m1 + 1.0) / omq * w_inf;
}

/// Largest derivative gain preserving pre-peak monotone decrease:
/// (1-q) / ((R-1) M); unbounded when R = 1.
inline double derivative_gain_threshold(double q, double m_bound,
                                        double r_smooth) {
  if (r_smooth < 1.0)
    throw InvalidInputError("derivative_gain_threshold: R must be >= 1");
  if (r_smooth == 1.0) return std::numeric_limits<double>::infinity();
  return (1.0 - q) / ((r_smooth - 1.0) * m_bound);
}

/// Conservative smoothness ratio R from a PI trace: max of
/// e_v(k-1)/e_v(k) over the positive pre-peak prefix, times 1.1.
inline double estimate_r_smooth(const ScalarTrace& pi_trace) {
  const auto& e = pi_trace.e_v;
  OvershootReport rep = detect_overshoots(pi_trace);
  long limit = rep.first ? rep.first->i_max
                         : static_cast<long>(e.size());
  if (limit < 2)
    throw InsufficientTraceError("estimate_r_smooth: i_max < 2");
  double max_ratio = -std::numeric_limits<double>::infinity();
  for (long k = 1; k < limit; ++k)
    if (e[k] > 0) max_ratio = std::max(max_ratio, e[k - 1] / e[k]);
  if (!std::isfinite(max_ratio))
    throw InsufficientTraceError("estimate_r_smooth: no positive prefix");
  return 1.1 * std::max(1.0, max_ratio);
}

/// Closed-loop block matrices for scalar-times-identity gains:
/// M_P = A(I-K_p), G = A K_i, H = A K_d, the PI lift
/// [[M_P, -G],[I, I]] and the PID lift
/// [[M_P, -G, -H],[I, I, 0],[M_P - I, -G, -H]].
inline LiftedMatrices lifted_matrices(const Mat& a_bar, const Gains& g) {
  linalg::require_finite(a_bar, "a_bar");
  if (a_bar.rows() != a_bar.cols())
    throw InvalidInputError("lifted_matrices: a_bar must be square");
  const Eigen::Index d = a_bar.rows();
  const Mat eye = Mat::Identity(d, d);
  LiftedMatrices out;
  out.m_p = (1.0 - g.kp) * a_bar;
  out.g = g.ki * a_bar;
  out.hmat = g.kd * a_bar;
  out.m_i = Mat::Zero(2 * d, 2 * d);
  out.m_i.topLeftCorner(d, d) = out.m_p;
  out.m_i.topRightCorner(d, d) = -out.g;
  out.m_i.bottomLeftCorner(d, d) = eye;
  out.m_i.bottomRightCorner(d, d) = eye;
  out.m_d = Mat::Zero(3 * d, 3 * d);
  out.m_d.block(0, 0, d, d) = out.m_p;
  out.m_d.block(0, d, d, d) = -out.g;
  out.m_d.block(0, 2 * d, d, d) = -out.hmat;
  out.m_d.block(d, 0, d, d) = eye;
  out.m_d.block(d, d, d, d) = eye;
  out.m_d.block(2 * d, 0, d, d) = out.m_p - eye;
  out.m_d.block(2 * d, d, d, d) = -out.g;
  out.m_d.block(2 * d, 2 * d, d, d) = -out.hmat;
  return out;
}

/// PID ISS certificate from the PI Lyapunov data:
///   eps = mu / (8 ||P|| ||M_i||^2),
///   r   = mu / (8 (||M_p - I||^2 + M h)),
///   S   = 3 mu / 8,
///   T   = r (1 - 3 M^2 l^2) - ||P|| M^2 l^2 (1/eps + 1),
/// admissible l^2 < r / ((||P||(1/eps + 1) + 3 r) M^2).
inline LyapunovCertificate certify_pid(double m_bound, double q, double h,
                                       double ell, double mu, double p_norm,
                                       double m_i_norm,
                                       double m_p_minus_i_norm) {
  if (q + m_bound * h >= 1.0)
    throw InvalidCertificateError("certify_pid: PI loop not certified");
  if (mu <= 0)
    throw InvalidCertificateError("certify_pid: mu must be positive");
  LyapunovCertificate cert;
  cert.mu = mu;
  cert.epsilon = mu / (8.0 * p_norm * m_i_norm * m_i_norm);
  cert.r_weight =
      mu / (8.0 * (m_p_minus_i_norm * m_p_minus_i_norm + m_bound * h));
  cert.s_margin = 0.375 * mu;
  const double m2l2 = m_bound * m_bound * ell * ell;
  cert.t_margin = cert.r_weight * (1.0 - 3.0 * m2l2) -
                  p_norm * m2l2 * (1.0 / cert.epsilon + 1.0);
  cert.admissible_ell_sq =
      cert.r_weight / ((p_norm * (1.0 / cert.epsilon + 1.0) +
                        3.0 * cert.r_weight) *
                       m_bound * m_bound);
  cert.valid = (cert.s_margin > 0 && cert.t_margin > 0);
  return cert;
}

/// Full route for a time-invariant PI loop: builds the lifted matrix,
/// solves the discrete Lyapunov equation with the given Q (default
/// identity), extracts mu = lambda_min(Q) and delegates to certify_pid.
inline LyapunovCertificate certify_pid_lti(const Mat& a_bar, const Gains& g,
                                           std::optional<Mat> q_matrix =
                                               std::nullopt) {
  LiftedMatrices lm = lifted_matrices(a_bar, g);
  const Eigen::Index n = lm.m_i.rows();
  Mat q = q_matrix.value_or(Mat::Identity(n, n));
  Mat p = linalg::solve_discrete_lyapunov(lm.m_i, q);
  Eigen::SelfAdjointEigenSolver<Mat> qes(q);
  const double mu = qes.eigenvalues().minCoeff();
  const double m_bound = linalg::spectral_norm(a_bar);
  const double q_contr = linalg::spectral_norm(lm.m_p);
  LyapunovCertificate cert = certify_pid(
      m_bound, q_contr, g.ki, g.kd, mu, linalg::spectral_norm(p),
      linalg::spectral_norm(lm.m_i),
      linalg::spectral_norm(Mat(lm.m_p - Mat::Identity(a_bar.rows(),
                                                       a_bar.cols()))));
  cert.p_matrix = std::move(p);
  cert.q_matrix = std::move(q);
  return cert;
}

struct OvershootComparison {
  bool has_events = false;
  double a0_pi = 0;
  double a0_pid = 0;
  bool reduced = false;
  bool precondition_met = false;
};

/// First-overshoot comparison of a PI and a PID trace from the same
/// plant/disturbance realization. precondition_met checks pre-peak
/// monotone decrease of the PID scalar error.
inline OvershootComparison compare_first_overshoot(
    const ScalarTrace& pi_trace, const ScalarTrace& pid_trace) {
  OvershootComparison out;
  OvershootReport pi_rep = detect_overshoots(pi_trace);
  OvershootReport pid_rep = detect_overshoots(pid_trace);
  if (!pi_rep.first && !pid_rep.first) return out;
  out.has_events = true;
  out.a0_pi = pi_rep.first ? pi_rep.first->a0 : 0.0;
  out.a0_pid = pid_rep.first ? pid_rep.first->a0 : 0.0;
  out.reduced = (out.a0_pid <= out.a0_pi + 1e-12);
  long peak = pid_rep.first ? pid_rep.first->i_max
                            : static_cast<long>(pid_trace.e_v.size()) - 1;
  out.precondition_met = true;
  for (long k = 0; k + 1 <= peak; ++k)
    if (pid_trace.e_v[k + 1] > pid_trace.e_v[k] + 1e-12) {
      out.precondition_met = false;
      break;
    }
  return out;
}

}  // namespace analysis
}  // namespace pidsteer

#endif  // PIDSTEER_ANALYSIS_HPP
