#ifndef PIDSTEER_PLANT_HPP
#define PIDSTEER_PLANT_HPP

// The contrastive two-branch layerwise plant: N pairs of trajectories
// propagated through per-pair layer maps, with exact stepping, local
// linearization (mean Jacobian + heterogeneity disturbance) and the
// linearized closed-loop simulator
//   e(k+1) = A(k) e(k) - A(k) u(k) + w(k).

#include <cmath>
#include <random>
#include <vector>

#include "pidsteer/controller.hpp"
#include "pidsteer/errors.hpp"
#include "pidsteer/linalg.hpp"
#include "pidsteer/trace.hpp"

namespace pidsteer {

enum class LayerKind { linear, tanh_residual };

/// One layer map. linear: x -> W x + b, Jacobian W everywhere.
/// tanh-residual: x -> x + scale * tanh(W x + b) entrywise,
/// Jacobian I + scale * diag(1 - tanh^2(W x + b)) W.
struct LayerMap {
  LayerKind kind = LayerKind::linear;
  Mat weight;
  Vec bias;
  double scale = 1.0;  // residual step size, tanh-residual only

  Vec apply(const Vec& x) const {
    if (x.size() != weight.cols())
      throw InvalidInputError("LayerMap::apply: dimension mismatch");
    switch (kind) {
      case LayerKind::linear:
        return weight * x + bias;
      case LayerKind::tanh_residual: {
        Vec z = weight * x + bias;
        return x + scale * z.array().tanh().matrix();
      }
    }
    throw InvalidInputError("LayerMap: unknown kind");
  }

  Mat jacobian(const Vec& x) const {
    if (x.size() != weight.cols())
      throw InvalidInputError("LayerMap::jacobian: dimension mismatch");
    switch (kind) {
      case LayerKind::linear:
        return weight;
      case LayerKind::tanh_residual: {
        Vec z = weight * x + bias;
        Vec sech2 = (1.0 - z.array().tanh().square()).matrix();
        return Mat::Identity(x.size(), x.size()) +
               scale * sech2.asDiagonal() * weight;
      }
    }
    throw InvalidInputError("LayerMap: unknown kind");
  }
};

struct ContrastivePlant {
  Eigen::Index dim = 0;
  int pairs = 0;
  // layers[k][i]: map for pair i at layer k. Heterogeneity across i is
  // what produces the disturbance.
  std::vector<std::vector<LayerMap>> layers;
  std::vector<Vec> initial_plus;
  std::vector<Vec> initial_minus;

  long layer_count() const { return static_cast<long>(layers.size()); }

  void validate() const {
    if (pairs < 1 || dim < 1 || layers.empty())
      throw InvalidInputError("plant: need pairs >= 1, dim >= 1, layers >= 1");
    if (static_cast<int>(initial_plus.size()) != pairs ||
        static_cast<int>(initial_minus.size()) != pairs)
      throw InvalidInputError("plant: initial state count != pairs");
    for (const auto& per_pair : layers) {
      if (static_cast<int>(per_pair.size()) != pairs)
        throw InvalidInputError("plant: layer map count != pairs");
      for (const auto& lm : per_pair)
        if (lm.weight.rows() != dim || lm.weight.cols() != dim ||
            lm.bias.size() != dim)
          throw InvalidInputError("plant: layer map dimension mismatch");
    }
    for (const auto& x : initial_plus) linalg::require_finite(x, "x_plus(0)");
    for (const auto& x : initial_minus) linalg::require_finite(x, "x_minus(0)");
  }
};

/// Linearization of one step: per-pair errors, their mean, the mean
/// Jacobian and the heterogeneity disturbance w = (1/N) sum A~_i e~_i.
struct PlantStep {
  long k = 0;
  Vec e_bar;
  std::vector<Vec> per_pair_errors;
  Mat mean_jacobian;
  Vec disturbance;
};

/// e_bar = (1/N) sum (x_i^+ - x_i^-)
inline Vec average_error(const std::vector<Vec>& plus,
                         const std::vector<Vec>& minus) {
  if (plus.size() != minus.size() || plus.empty())
    throw InvalidInputError("average_error: branch length mismatch");
  Vec acc = Vec::Zero(plus[0].size());
  for (size_t i = 0; i < plus.size(); ++i) acc += plus[i] - minus[i];
  return acc / static_cast<double>(plus.size());
}

/// x_i^+(k+1) = f_i^k(x_i^+(k)); x_i^-(k+1) = f_i^k(x_i^-(k) + u).
/// Steering is added on the minus branch before the layer map.
inline std::pair<std::vector<Vec>, std::vector<Vec>> step_exact(
    const ContrastivePlant& plant, const std::vector<Vec>& plus,
    const std::vector<Vec>& minus, const Vec& u, long k) {
  if (k < 0 || k >= plant.layer_count())
    throw InvalidInputError("step_exact: layer index out of range");
  if (u.size() != plant.dim)
    throw InvalidInputError("step_exact: u dimension mismatch");
  if (static_cast<int>(plus.size()) != plant.pairs ||
      static_cast<int>(minus.size()) != plant.pairs)
    throw InvalidInputError("step_exact: state count mismatch");
  std::vector<Vec> next_plus(plant.pairs), next_minus(plant.pairs);
  for (int i = 0; i < plant.pairs; ++i) {
    const LayerMap& lm = plant.layers[k][i];
    next_plus[i] = lm.apply(plus[i]);
    next_minus[i] = lm.apply(minus[i] + u);
  }
  return {std::move(next_plus), std::move(next_minus)};
}

/// Evaluates the Jacobians at x_i^+(k), forms the mean Jacobian and the
/// disturbance from the per-pair deviations.
inline PlantStep local_model(const ContrastivePlant& plant,
                             const std::vector<Vec>& plus,
                             const std::vector<Vec>& minus, long k) {
  if (k < 0 || k >= plant.layer_count())
    throw InvalidInputError("local_model: layer index out of range");
  const int n = plant.pairs;
  PlantStep out;
  out.k = k;
  out.per_pair_errors.resize(n);
  Mat a_bar = Mat::Zero(plant.dim, plant.dim);
  std::vector<Mat> jac(n);
  for (int i = 0; i < n; ++i) {
    out.per_pair_errors[i] = plus[i] - minus[i];
    jac[i] = plant.layers[k][i].jacobian(plus[i]);
    a_bar += jac[i];
  }
  a_bar /= static_cast<double>(n);
  out.e_bar = average_error(plus, minus);
  Vec w = Vec::Zero(plant.dim);
  for (int i = 0; i < n; ++i) {
    Mat a_tilde = jac[i] - a_bar;
    Vec e_tilde = out.per_pair_errors[i] - out.e_bar;
    w += a_tilde * e_tilde;
  }
  out.mean_jacobian = std::move(a_bar);
  out.disturbance = w / static_cast<double>(n);
  return out;
}

/// || e_exact(k+1) - e_model(k+1) || where e_model uses the local
/// linearization quantities of local_model.
inline double linearization_residual(const ContrastivePlant& plant,
                                     const std::vector<Vec>& plus,
                                     const std::vector<Vec>& minus,
                                     const Vec& u, long k) {
  PlantStep lm = local_model(plant, plus, minus, k);
  auto [np, nm] = step_exact(plant, plus, minus, u, k);
  Vec e_exact = average_error(np, nm);
  Vec e_model = lm.mean_jacobian * (lm.e_bar - u) + lm.disturbance;
  return (e_exact - e_model).norm();
}

/// Iterates e(k+1) = A(k)(e(k) - u(k)) + w(k) exactly, recording each step.
inline Trace simulate_linearized(const LinearizedTrajectory& traj,
                                 ControllerState controller, const Vec& e0,
                                 long steps) {
  if (steps < 1 || steps > static_cast<long>(traj.size()))
    throw InvalidInputError("simulate_linearized: bad step count");
  linalg::require_finite(e0, "e0");
  Trace trace;
  trace.gains = controller.gains;
  trace.steps.reserve(steps);
  Vec e = e0;
  for (long k = 0; k < steps; ++k) {
    TraceStep st;
    st.k = k;
    st.e_bar = e;
    st.s = controller.integrator;
    st.u = controller.control(e);
    st.w = traj[k].w;
    st.a_bar = traj[k].a_bar;
    e = st.a_bar * (e - st.u) + st.w;
    if (!e.allFinite())
      throw DivergenceError("simulate_linearized: non-finite state", k + 1);
    trace.steps.push_back(std::move(st));
  }
  trace.final_error = e;
  return trace;
}

struct RandomPlantConfig {
  Eigen::Index dim = 4;
  int pairs = 4;
  long layers = 32;
  LayerKind kind = LayerKind::linear;
  double jacobian_norm_cap = 0.9;
  double heterogeneity = 0.1;
  std::uint64_t seed = 0;
  // Share one set of per-pair maps across all layers. Needed when a
  // steady state of the closed loop should exist.
  bool time_invariant = false;
  double initial_separation = 1.0;  // ||x_plus(0) - x_minus(0)|| scale
};

/// Deterministic synthetic plant. For linear plants the per-pair weight
/// perturbations are centered, so the mean Jacobian equals the base weight
/// and the cap applies exactly. For tanh-residual plants the residual scale
/// is chosen so that ||I + scale*D*W|| <= 1 + scale*||W|| <= cap, which
/// requires cap > 1.
inline ContrastivePlant make_random_plant(const RandomPlantConfig& cfg) {
  if (cfg.jacobian_norm_cap <= 0)
    throw InvalidInputError("make_random_plant: cap must be positive");
  if (cfg.kind == LayerKind::tanh_residual && cfg.jacobian_norm_cap <= 1.0)
    throw InvalidInputError(
        "make_random_plant: tanh-residual plants need cap > 1");
  std::mt19937_64 rng(cfg.seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  auto random_mat = [&](Eigen::Index r, Eigen::Index c) {
    Mat m(r, c);
    for (Eigen::Index i = 0; i < r; ++i)
      for (Eigen::Index j = 0; j < c; ++j) m(i, j) = gauss(rng);
    return m;
  };
  auto random_vec = [&](Eigen::Index d) {
    Vec v(d);
    for (Eigen::Index i = 0; i < d; ++i) v(i) = gauss(rng);
    return v;
  };

  ContrastivePlant plant;
  plant.dim = cfg.dim;
  plant.pairs = cfg.pairs;
  const long distinct = cfg.time_invariant ? 1 : cfg.layers;
  std::vector<std::vector<LayerMap>> generated(distinct);
  for (long k = 0; k < distinct; ++k) {
    // Symmetric positive-definite mean map: keeps v^T A(k) v >= 0 along
    // every direction, so the closed loops the controllers assume well
    // behaved (positive projected gain) are realizable for any depth.
    Mat raw = random_mat(cfg.dim, cfg.dim);
    Mat base = raw.transpose() * raw / static_cast<double>(cfg.dim) +
               0.25 * Mat::Identity(cfg.dim, cfg.dim);
    Vec bias = 0.1 * random_vec(cfg.dim);
    // Centered per-pair perturbations: the mean map stays equal to base.
    std::vector<Mat> perturb(cfg.pairs);
    Mat mean_perturb = Mat::Zero(cfg.dim, cfg.dim);
    for (int i = 0; i < cfg.pairs; ++i) {
      perturb[i] = random_mat(cfg.dim, cfg.dim);
      mean_perturb += perturb[i];
    }
    mean_perturb /= static_cast<double>(cfg.pairs);

    double base_norm = linalg::spectral_norm(base);
    double w_scale, res_scale;
    if (cfg.kind == LayerKind::linear) {
      w_scale = cfg.jacobian_norm_cap / base_norm;
      res_scale = 1.0;
    } else {
      w_scale = 1.0 / base_norm;  // unit-norm weights
      res_scale = cfg.jacobian_norm_cap - 1.0;
    }
    generated[k].resize(cfg.pairs);
    for (int i = 0; i < cfg.pairs; ++i) {
      LayerMap lm;
      lm.kind = cfg.kind;
      lm.weight = w_scale * (base + cfg.heterogeneity *
                                        (perturb[i] - mean_perturb));
      lm.bias = bias;
      lm.scale = res_scale;
      generated[k][i] = std::move(lm);
    }
  }
  plant.layers.resize(cfg.layers);
  for (long k = 0; k < cfg.layers; ++k)
    plant.layers[k] = generated[cfg.time_invariant ? 0 : k];

  plant.initial_plus.resize(cfg.pairs);
  plant.initial_minus.resize(cfg.pairs);
  for (int i = 0; i < cfg.pairs; ++i) {
    plant.initial_plus[i] = random_vec(cfg.dim);
    Vec sep = random_vec(cfg.dim);
    plant.initial_minus[i] =
        plant.initial_plus[i] - cfg.initial_separation * sep / sep.norm();
  }
  plant.validate();
  return plant;
}

}  // namespace pidsteer

#endif  // PIDSTEER_PLANT_HPP
