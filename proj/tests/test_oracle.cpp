#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "pidsteer/analysis.hpp"
#include "pidsteer/oracle.hpp"
#include "pidsteer/steering.hpp"

using namespace pidsteer;

TEST_CASE("fd_jacobian") {
  std::mt19937_64 rng(41);
  std::normal_distribution<double> g(0.0, 1.0);

  // linear map: Jacobian is the weight matrix
  LayerMap lin;
  lin.weight = Mat::NullaryExpr(3, 3, [&](Eigen::Index, Eigen::Index) {
    return g(rng);
  });
  lin.bias = Vec::NullaryExpr(3, [&](Eigen::Index) { return g(rng); });
  Vec x = Vec::NullaryExpr(3, [&](Eigen::Index) { return g(rng); });
  CHECK((oracle::fd_jacobian(lin, x) - lin.weight).cwiseAbs().maxCoeff() <
        1e-9);

  // tanh-residual at x = 0, b = 0: J = I + scale * W
  LayerMap th;
  th.kind = LayerKind::tanh_residual;
  th.weight = lin.weight;
  th.bias = Vec::Zero(3);
  th.scale = 0.4;
  Mat expect = Mat::Identity(3, 3) + 0.4 * th.weight;
  CHECK((oracle::fd_jacobian(th, Vec(Vec::Zero(3))) - expect)
            .cwiseAbs()
            .maxCoeff() < 1e-8);

  // random tanh map: analytic vs finite differences
  th.bias = Vec::NullaryExpr(3, [&](Eigen::Index) { return g(rng); });
  th.weight /= linalg::spectral_norm(th.weight);  // unit-scale weights
  CHECK((oracle::fd_jacobian(th, x) - th.jacobian(x)).cwiseAbs().maxCoeff() <
        1e-5);

  oracle::FdJacobianConfig bad;
  bad.step = 0;
  CHECK_THROWS_AS(oracle::fd_jacobian(lin, x, bad), InvalidInputError);
}

TEST_CASE("naive_rollout equals the main sequential path") {
  for (auto kind : {LayerKind::linear, LayerKind::tanh_residual}) {
    RandomPlantConfig cfg;
    cfg.kind = kind;
    cfg.jacobian_norm_cap = (kind == LayerKind::linear) ? 0.9 : 1.3;
    cfg.heterogeneity = 0.2;
    cfg.seed = 51;
    ContrastivePlant p = make_random_plant(cfg);

    for (const Gains& g : {Gains(0, 0, 0), Gains(0.7, 0, 0),
                           Gains(0.5, 0.05, 0.1)}) {
      Trace naive = oracle::naive_rollout(p, g, SteerFn{});
      auto [r, main] =
          steering_vectors_sequential(p, ControllerState(g, p.dim),
                                      SteerFn{});
      REQUIRE(naive.steps.size() == main.steps.size());
      for (size_t k = 0; k < main.steps.size(); ++k) {
        CHECK((naive.steps[k].e_bar - main.steps[k].e_bar)
                  .cwiseAbs()
                  .maxCoeff() < 1e-12);
        CHECK((naive.steps[k].u - main.steps[k].u).cwiseAbs().maxCoeff() <
              1e-12);
        CHECK((naive.steps[k].w - main.steps[k].w).cwiseAbs().maxCoeff() <
              1e-12);
      }
      CHECK((naive.final_error - main.final_error).cwiseAbs().maxCoeff() <
            1e-12);
    }
  }
}

TEST_CASE("naive_rollout matches under directional ablation") {
  RandomPlantConfig cfg;
  cfg.heterogeneity = 0.15;
  cfg.seed = 52;
  ContrastivePlant p = make_random_plant(cfg);
  SteerFn abl;
  abl.kind = SteerFn::Kind::directional_ablation;
  Gains g(0.6, 0.02, 0);
  Trace naive = oracle::naive_rollout(p, g, abl);
  auto [r, main] =
      steering_vectors_sequential(p, ControllerState(g, p.dim), abl);
  for (size_t k = 0; k < main.steps.size(); ++k)
    CHECK((naive.steps[k].e_bar - main.steps[k].e_bar).cwiseAbs().maxCoeff() <
          1e-12);
}

TEST_CASE("grid_min_radius locates the optimal integral gain") {
  const double q = 0.5, m = 2.0;
  std::vector<double> grid;
  for (double h = 1e-4; h < (1.0 - q) / m; h += 1e-4) grid.push_back(h);
  auto [h_best, r_best] = oracle::grid_min_radius(q, m, grid);
  CHECK(std::abs(h_best - analysis::optimal_integral_gain(q, m)) <= 1e-4);
  CHECK(r_best == doctest::Approx(0.75).epsilon(1e-3));

  // radius decreases left of h*, increases right of h*
  const double h_star = analysis::optimal_integral_gain(q, m);
  auto radius = [&](double h) {
    return linalg::spectral_radius(analysis::pi_comparison_matrix(q, m, h));
  };
  double prev = radius(grid[0]);
  for (double h = 2e-4; h < h_star - 1e-4; h += 1e-4) {
    const double r = radius(h);
    CHECK(r <= prev + 1e-12);
    prev = r;
  }
  prev = radius(h_star + 1e-4);
  for (double h = h_star + 2e-4; h < (1.0 - q) / m; h += 1e-4) {
    const double r = radius(h);
    CHECK(r >= prev - 1e-12);
    prev = r;
  }

  CHECK_THROWS_AS(oracle::grid_min_radius(q, m, {}), InvalidInputError);
}

TEST_CASE("grid_min_radius agrees with the eigensolver on the grid") {
  std::mt19937_64 rng(53);
  std::uniform_real_distribution<double> uni(0.1, 0.8);
  for (int t = 0; t < 5; ++t) {
    const double q = uni(rng);
    const double m = 0.5 + uni(rng);
    std::vector<double> grid;
    for (double h = 1e-3; h < (1.0 - q) / m; h += 1e-3) grid.push_back(h);
    auto [h_best, r_best] = oracle::grid_min_radius(q, m, grid);
    CHECK(r_best ==
          doctest::Approx(linalg::spectral_radius(
                              analysis::pi_comparison_matrix(q, m, h_best)))
              .epsilon(1e-10));
  }
}
