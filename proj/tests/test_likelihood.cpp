#include <doctest.h>

#include <cmath>

#include "massive/likelihood.hpp"
#include "massive/ml_manifold.hpp"
#include "massive/rng.hpp"
#include "massive/types.hpp"
#include "support/oracles.hpp"
#include "support/test_util.hpp"

using namespace massive;

TEST_CASE("conditional moments reduce to the marginals for independent blocks") {
  // E[G] = 0, E[GGᵀ] = I, E[GX] = E[GY] = 0: regressions vanish and the
  // conditional moments equal the raw marginal ones.
  SufficientStats s;
  s.n = 100;
  s.mean_g = Vec::Zero(2);
  s.m_gg = Mat::Identity(2, 2);
  s.m_gx = Vec::Zero(2);
  s.m_gy = Vec::Zero(2);
  s.mean_x = 0.0;
  s.mean_y = 0.0;
  s.m_xx = 2.0;
  s.m_yy = 3.0;
  s.m_xy = 0.5;

  const ConditionalMoments cm = conditional_moments(s);
  CHECK(cm.rx.norm() == 0.0);
  CHECK(cm.ry.norm() == 0.0);
  CHECK(cm.var_x_g == 2.0);
  CHECK(cm.var_y_g == 3.0);
  CHECK(cm.cov_xy_g == 0.5);
}

TEST_CASE("conditional moments match a direct least-squares oracle on rows") {
  Rng rng(61);
  const DataRows rows = test_util::random_rows(rng, 3, 500);
  const SufficientStats s = moments_from_rows(rows);
  const ConditionalMoments cm = conditional_moments(s);

  // Through-origin normal equations solved straight from the rows.
  const Mat gtg = rows.g.transpose() * rows.g;
  const Vec rx = gtg.ldlt().solve(rows.g.transpose() * rows.x);
  const Vec ry = gtg.ldlt().solve(rows.g.transpose() * rows.y);
  const Vec res_x = rows.x - rows.g * rx;
  const Vec res_y = rows.y - rows.g * ry;
  const double n = static_cast<double>(rows.x.size());

  CHECK((cm.rx - rx).lpNorm<Eigen::Infinity>() < 1e-10);
  CHECK((cm.ry - ry).lpNorm<Eigen::Infinity>() < 1e-10);
  CHECK(cm.var_x_g == doctest::Approx(res_x.dot(rows.x) / n).epsilon(1e-10));
  CHECK(cm.var_y_g == doctest::Approx(res_y.dot(rows.y) / n).epsilon(1e-10));
  CHECK(cm.cov_xy_g == doctest::Approx(res_x.dot(res_y) / n).epsilon(1e-8));
}

TEST_CASE("model covariance on hand parameter values") {
  ScaledParams p;
  p.alpha_t = Vec::Zero(1);
  p.kappa_t = Vec::Zero(1);

  SUBCASE("all-zero parameters give the identity") {
    const Eigen::Matrix2d sigma = model_sigma(p);
    CHECK(sigma(0, 0) == 1.0);
    CHECK(sigma(0, 1) == 0.0);
    CHECK(sigma(1, 1) == 1.0);
  }
  SUBCASE("a unit causal effect adds its variance to the outcome") {
    p.beta_t = 1.0;
    const Eigen::Matrix2d sigma = model_sigma(p);
    CHECK(sigma(0, 0) == 1.0);
    CHECK(sigma(0, 1) == 1.0);
    CHECK(sigma(1, 1) == 2.0);
  }
  SUBCASE("confounding couples the diagonal through γ̃") {
    p.gamma_x_t = 0.5;
    p.gamma_y_t = -0.25;
    p.log_sd_x = std::log(2.0);
    const Eigen::Matrix2d sigma = model_sigma(p);
    CHECK(sigma(0, 0) == doctest::Approx(4.0 * 1.25));
    CHECK(sigma(0, 1) == doctest::Approx(2.0 * (0.5 * -0.25)));
    CHECK(sigma(1, 1) == doctest::Approx(1.0 + 0.0625));
  }
}

TEST_CASE("model covariance is SPD and matches Monte Carlo residual moments") {
  Rng rng(67);
  for (int trial = 0; trial < 5; ++trial) {
    const ScaledParams p = test_util::random_params(rng, 1);
    const Eigen::Matrix2d sigma = model_sigma(p);
    CHECK(sigma(0, 1) == sigma(1, 0));
    CHECK(sigma(0, 0) > 0.0);
    CHECK(sigma.determinant() > 0.0);
  }

  // Structural simulation of the conditional residual pair:
  //   r₁ = γ_X u + ε_X,  r₂ = β r₁ + γ_Y u + ε_Y.
  ScaledParams p;
  p.alpha_t = Vec::Zero(1);
  p.kappa_t = Vec::Zero(1);
  p.beta_t = 0.4;
  p.log_sd_x = std::log(1.5);
  p.log_sd_y = std::log(0.8);
  p.gamma_x_t = 0.6;
  p.gamma_y_t = -0.3;
  const double sx = 1.5, sy = 0.8;
  const double beta = std::exp(p.log_sd_y - p.log_sd_x) * p.beta_t;
  const double gx = sx * p.gamma_x_t, gy = sy * p.gamma_y_t;

  Rng mc(71);
  const int n = 200000;
  double s11 = 0, s12 = 0, s22 = 0;
  for (int i = 0; i < n; ++i) {
    const double u = mc.next_normal();
    const double r1 = gx * u + sx * mc.next_normal();
    const double r2 = beta * r1 + gy * u + sy * mc.next_normal();
    s11 += r1 * r1;
    s12 += r1 * r2;
    s22 += r2 * r2;
  }
  const Eigen::Matrix2d sigma = model_sigma(p);
  CHECK(s11 / n == doctest::Approx(sigma(0, 0)).epsilon(0.02));
  CHECK(s12 / n == doctest::Approx(sigma(0, 1)).epsilon(0.05));
  CHECK(s22 / n == doctest::Approx(sigma(1, 1)).epsilon(0.02));
}

TEST_CASE("moment-based likelihood equals the per-row oracle") {
  Rng rng(73);
  const DataRows rows = test_util::random_rows(rng, 2, 50);
  const SufficientStats stats = moments_from_rows(rows);
  const Vec s_g = stats.scale_g();

  for (int trial = 0; trial < 20; ++trial) {
    const ScaledParams p = test_util::random_params(rng, 2);
    const double lib = log_likelihood(stats, p);
    const double oracle = oracles::row_loglik(rows, unscale_params(p, s_g));
    CHECK(lib == doctest::Approx(oracle).epsilon(1e-9));
  }
}

TEST_CASE("likelihood at a manifold point attains the closed-form maximum") {
  Rng rng(79);
  const SufficientStats stats = test_util::random_stats(rng, 3, 400);
  const ConditionalMoments cm = conditional_moments(stats);
  const double det = cm.var_x_g * cm.var_y_g - cm.cov_xy_g * cm.cov_xy_g;
  const double max_ll =
      -0.5 * static_cast<double>(stats.n) * (std::log(4.0 * M_PI * M_PI * det) + 2.0);

  for (const auto& [gx, gy] : {std::pair{0.0, 0.0}, {1.2, -0.4}, {-2.0, 2.0}}) {
    const ScaledParams p = ml_given_confounding(stats, gx, gy);
    CHECK(log_likelihood(stats, p) == doctest::Approx(max_ll).epsilon(1e-10));
  }

  // Local maximality: nudging any non-confounder coordinate decreases the
  // likelihood (the two γ̃ coordinates trace the flat manifold).
  const ScaledParams p = ml_given_confounding(stats, 0.7, -0.3);
  const Vec v = p.pack();
  const double base = log_likelihood(stats, p);
  for (int c = 0; c < 2 * 3 + 3; ++c) {
    for (const double step : {1e-3, -1e-3}) {
      Vec w = v;
      w[c] += step;
      CHECK(log_likelihood(stats, ScaledParams::unpack(w)) < base);
    }
  }
}

TEST_CASE("likelihood is invariant under the confounder sign flip") {
  Rng rng(83);
  const SufficientStats stats = test_util::random_stats(rng, 2, 300);
  for (int trial = 0; trial < 20; ++trial) {
    ScaledParams p = test_util::random_params(rng, 2);
    ScaledParams q = p;
    q.gamma_x_t = -q.gamma_x_t;
    q.gamma_y_t = -q.gamma_y_t;
    CHECK(log_likelihood(stats, p) == log_likelihood(stats, q));
  }
}

TEST_CASE("analytic likelihood gradient matches central differences") {
  Rng rng(89);
  const SufficientStats stats = test_util::random_stats(rng, 2, 300);
  const int d = ScaledParams::dim(2);

  for (int trial = 0; trial < 20; ++trial) {
    const ScaledParams p = test_util::random_params(rng, 2);
    const Vec v = p.pack();
    const Vec g = log_likelihood_grad(stats, p);
    const double scale = std::max(1.0, g.lpNorm<Eigen::Infinity>());
    for (int c = 0; c < d; ++c) {
      const double h = 1e-6 * std::max(1.0, std::abs(v[c]));
      Vec hi = v, lo = v;
      hi[c] += h;
      lo[c] -= h;
      const double fd = (log_likelihood(stats, ScaledParams::unpack(hi)) -
                         log_likelihood(stats, ScaledParams::unpack(lo))) /
                        (2.0 * h);
      CHECK(std::abs(g[c] - fd) / scale < 1e-5);
    }
  }
}

TEST_CASE("extreme parameters fail softly") {
  Rng rng(97);
  const SufficientStats stats = test_util::random_stats(rng, 1, 100);

  SUBCASE("overflowing residuals are infeasible, not errors") {
    ScaledParams p;
    p.alpha_t = Vec::Constant(1, 1e200);
    p.kappa_t = Vec::Zero(1);
    const double v = log_likelihood(stats, p);
    CHECK(std::isinf(v));
    CHECK(v < 0.0);
  }
  SUBCASE("an overflowing model covariance is a numerical error") {
    ScaledParams p;
    p.alpha_t = Vec::Zero(1);
    p.kappa_t = Vec::Zero(1);
    p.beta_t = 1e200;
    try {
      log_likelihood(stats, p);
      CHECK(false);
    } catch (const error& e) {
      CHECK(e.kind() == errc::numerical);
    }
  }
}
