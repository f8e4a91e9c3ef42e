#ifndef PIDSTEER_LINALG_HPP
#define PIDSTEER_LINALG_HPP

// Dense real matrix/vector kernel shared by every other module: operator
// norms, spectra, pseudoinverse, column-space projections and the discrete
// Lyapunov equation. Matrices are small (at most a few hundred dims), so
// robust dense decompositions are used throughout.

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <utility>

#include "pidsteer/errors.hpp"

namespace pidsteer {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;

namespace linalg {

// Relative singular-value cutoff for rank decisions (pinv, projections).
inline constexpr double kRankCutoff = 1e-10;

// Lyapunov series: stop once the added term drops below this norm.
inline constexpr double kLyapunovTermTol = 1e-14;
inline constexpr long kLyapunovMaxTerms = 100000;

inline void require_finite(const Mat& m, const char* what = "matrix") {
  if (m.rows() < 1 || m.cols() < 1)
    throw InvalidInputError(std::string(what) + " has zero dimension");
  if (!m.allFinite())
    throw InvalidInputError(std::string(what) + " has non-finite entries");
}

inline void require_finite(const Vec& v, const char* what = "vector") {
  if (v.size() < 1)
    throw InvalidInputError(std::string(what) + " has zero dimension");
  if (!v.allFinite())
    throw InvalidInputError(std::string(what) + " has non-finite entries");
}

/// Largest singular value (operator norm induced by the Euclidean norm).
inline double spectral_norm(const Mat& m) {
  require_finite(m);
  Eigen::JacobiSVD<Mat> svd(m);
  return svd.singularValues()(0);
}

/// Largest eigenvalue modulus. Complex eigenvalues are handled internally.
inline double spectral_radius(const Mat& m) {
  require_finite(m);
  if (m.rows() != m.cols())
    throw InvalidInputError("spectral_radius requires a square matrix");
  Eigen::EigenSolver<Mat> es(m, /*computeEigenvectors=*/false);
  return es.eigenvalues().cwiseAbs().maxCoeff();
}

/// Moore-Penrose pseudoinverse. Singular values below
/// kRankCutoff * sigma_max are treated as zero.
inline Mat pinv(const Mat& m) {
  require_finite(m);
  Eigen::JacobiSVD<Mat> svd(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const auto& sv = svd.singularValues();
  const double cutoff = kRankCutoff * sv(0);
  Vec inv_sv = Vec::Zero(sv.size());
  for (Eigen::Index i = 0; i < sv.size(); ++i)
    if (sv(i) > cutoff) inv_sv(i) = 1.0 / sv(i);
  return svd.matrixV() * inv_sv.asDiagonal() * svd.matrixU().transpose();
}

/// Splits w into its component in Im(a) and the orthogonal remainder.
inline std::pair<Vec, Vec> orthogonal_decompose(const Vec& w, const Mat& a) {
  require_finite(w, "w");
  require_finite(a, "a");
  if (a.rows() != w.size())
    throw InvalidInputError("orthogonal_decompose: a.rows != w.dim");
  Eigen::JacobiSVD<Mat> svd(a, Eigen::ComputeThinU);
  const auto& sv = svd.singularValues();
  const double cutoff = kRankCutoff * sv(0);
  Vec w_par = Vec::Zero(w.size());
  for (Eigen::Index i = 0; i < sv.size(); ++i) {
    if (sv(i) > cutoff) {
      const Vec u = svd.matrixU().col(i);
      w_par += u * u.dot(w);
    }
  }
  return {w_par, Vec(w - w_par)};
}

/// Solves M^T P M - P = -Q for P via the convergent series sum (M^T)^k Q M^k.
/// Requires spectral_radius(m) < 1 and q symmetric positive semidefinite.
inline Mat solve_discrete_lyapunov(const Mat& m, const Mat& q) {
  require_finite(m, "m");
  require_finite(q, "q");
  if (m.rows() != m.cols() || q.rows() != q.cols() || m.rows() != q.rows())
    throw InvalidInputError("solve_discrete_lyapunov: dimension mismatch");
  if ((q - q.transpose()).cwiseAbs().maxCoeff() > 1e-12)
    throw InvalidInputError("solve_discrete_lyapunov: q not symmetric");
  Eigen::SelfAdjointEigenSolver<Mat> qes(q);
  if (qes.eigenvalues().minCoeff() < -1e-12)
    throw InvalidInputError("solve_discrete_lyapunov: q not PSD");
  if (spectral_radius(m) >= 1.0)
    throw UnstableSystemError("solve_discrete_lyapunov: spectral radius >= 1");

  Mat p = q;
  Mat term = q;
  const Mat mt = m.transpose();
  for (long k = 0; k < kLyapunovMaxTerms; ++k) {
    term = mt * term * m;
    p += term;
    if (spectral_norm(term) < kLyapunovTermTol) break;
  }
  // Symmetrize away accumulation noise.
  return 0.5 * (p + p.transpose());
}

/// Gelfand envelope constant: C = max{1, max_{0<=k<=n} ||M^k|| rho^-k},
/// so that ||M^k|| <= C rho^k for all k once rho > spectral_radius(M).
inline double gelfand_constant(const Mat& m, double rho, int n = 500) {
  require_finite(m);
  if (m.rows() != m.cols())
    throw InvalidInputError("gelfand_constant requires a square matrix");
  double c = 1.0;
  Mat power = Mat::Identity(m.rows(), m.cols());
  double rho_k = 1.0;
  for (int k = 1; k <= n; ++k) {
    power = power * m;
    rho_k *= rho;
    c = std::max(c, spectral_norm(power) / rho_k);
  }
  return c;
}

}  // namespace linalg
}  // namespace pidsteer

#endif  // PIDSTEER_LINALG_HPP
