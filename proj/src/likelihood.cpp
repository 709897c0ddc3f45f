#include "massive/likelihood.hpp"

#include <cmath>
#include <limits>

namespace massive {

namespace {

constexpr double log_4pi2 = 3.6757541328186906;  // log(4π²)

// Shared intermediates of the likelihood value and gradient, all on the
// scale-free residual scale: every X-row is divided by σ_X and every Y-row by
// σ_Y, with the bare 2(log σ_X + log σ_Y) carried separately. This keeps
// the algebra well-conditioned when the optimizer probes extreme log-scales.
struct LikCore {
  double n;
  Vec a_t, b_t;                      // ã = α̃/s_g, b̃ = (β̃α̃+κ̃)/s_g
  double ex, ey;                     // exp(−log σ_X), exp(−log σ_Y)
  Vec m_a, m_b;                      // E[GGᵀ]ã, E[GGᵀ]b̃
  double s11, s12, s22;              // scale-free residual moments S̃
  double v11, v12, v22;              // scale-free model covariance Σ̃
  double det;                        // |Σ̃|
  double w11, w12, w22;              // Σ̃⁻¹
  double u1;                         // 1 + γ̃_X²
  double gyx;                        // γ̃_Y + β̃γ̃_X
};

LikCore lik_core(const SufficientStats& stats, const ScaledParams& p) {
  LikCore c;
  c.n = static_cast<double>(stats.n);
  const Vec s_g = stats.scale_g();
  c.a_t = p.alpha_t.cwiseQuotient(s_g);
  c.b_t = (p.beta_t * p.alpha_t + p.kappa_t).cwiseQuotient(s_g);
  c.ex = std::exp(-p.log_sd_x);
  c.ey = std::exp(-p.log_sd_y);
  c.m_a = stats.m_gg * c.a_t;
  c.m_b = stats.m_gg * c.b_t;

  c.s11 = c.ex * c.ex * stats.m_xx - 2.0 * c.ex * c.a_t.dot(stats.m_gx) + c.a_t.dot(c.m_a);
  c.s12 = c.ex * c.ey * stats.m_xy - c.ey * c.a_t.dot(stats.m_gy) -
          c.ex * c.b_t.dot(stats.m_gx) + c.a_t.dot(c.m_b);
  c.s22 = c.ey * c.ey * stats.m_yy - 2.0 * c.ey * c.b_t.dot(stats.m_gy) + c.b_t.dot(c.m_b);

  c.u1 = 1.0 + p.gamma_x_t * p.gamma_x_t;
  c.gyx = p.gamma_y_t + p.beta_t * p.gamma_x_t;
  c.v11 = c.u1;
  c.v12 = p.beta_t * c.u1 + p.gamma_x_t * p.gamma_y_t;
  c.v22 = 1.0 + p.beta_t * p.beta_t + c.gyx * c.gyx;
  c.det = c.v11 * c.v22 - c.v12 * c.v12;
  require(std::isfinite(c.det) && c.det > 0, errc::numerical,
          "model covariance is numerically singular");
  c.w11 = c.v22 / c.det;
  c.w12 = -c.v12 / c.det;
  c.w22 = c.v11 / c.det;
  return c;
}

}  // namespace

ConditionalMoments conditional_moments(const SufficientStats& stats) {
  stats.validate();
  Eigen::LLT<Mat> llt(stats.m_gg);
  require(llt.info() == Eigen::Success, errc::degenerate_input,
          "candidate second-moment matrix is singular");
  ConditionalMoments cm;
  cm.rx = llt.solve(stats.m_gx);
  cm.ry = llt.solve(stats.m_gy);
  cm.var_x_g = stats.m_xx - stats.m_gx.dot(cm.rx);
  cm.var_y_g = stats.m_yy - stats.m_gy.dot(cm.ry);
  cm.cov_xy_g = stats.m_xy - cm.rx.dot(stats.m_gy);
  require(cm.var_x_g > 1e-12 * stats.m_xx, errc::degenerate_input,
          "conditional variance of the exposure is numerically zero");
  require(cm.var_y_g > 1e-12 * stats.m_yy, errc::degenerate_input,
          "conditional variance of the outcome is numerically zero");
  require(cm.var_x_g * cm.var_y_g - cm.cov_xy_g * cm.cov_xy_g >
              1e-12 * cm.var_x_g * cm.var_y_g,
          errc::inconsistent_input,
          "conditional covariance of (X, Y) given G is not positive definite");
  return cm;
}

Eigen::Matrix2d model_sigma(const ScaledParams& p) {
  const double sx = std::exp(p.log_sd_x);
  const double sy = std::exp(p.log_sd_y);
  const double u1 = 1.0 + p.gamma_x_t * p.gamma_x_t;
  const double gyx = p.gamma_y_t + p.beta_t * p.gamma_x_t;
  Eigen::Matrix2d sigma;
  sigma(0, 0) = sx * sx * u1;
  sigma(0, 1) = sigma(1, 0) = sx * sy * (p.beta_t * u1 + p.gamma_x_t * p.gamma_y_t);
  sigma(1, 1) = sy * sy * (1.0 + p.beta_t * p.beta_t + gyx * gyx);
  return sigma;
}

double log_likelihood(const SufficientStats& stats, const ScaledParams& p) {
  const LikCore c = lik_core(stats, p);
  const double tr = c.w11 * c.s11 + 2.0 * c.w12 * c.s12 + c.w22 * c.s22;
  const double value =
      -0.5 * c.n *
      (log_4pi2 + 2.0 * (p.log_sd_x + p.log_sd_y) + std::log(c.det) + tr);
  // Residual overflow (extreme negative log-scales) can produce inf − inf in
  // the trace; such parameters are infeasible, not errors.
  return std::isnan(value) ? -std::numeric_limits<double>::infinity() : value;
}

Vec log_likelihood_grad(const SufficientStats& stats, const ScaledParams& p) {
  const LikCore c = lik_core(stats, p);
  const int J = p.j();
  const Vec s_g = stats.scale_g();

  // K = Σ̃⁻¹ − Σ̃⁻¹ S̃ Σ̃⁻¹ collects the tr(K·∂Σ̃) part of the gradient.
  const double k11 =
      c.w11 - (c.w11 * c.s11 * c.w11 + 2.0 * c.w11 * c.s12 * c.w12 + c.w12 * c.s22 * c.w12);
  const double k12 =
      c.w12 - (c.w11 * c.s11 * c.w12 + c.w11 * c.s12 * c.w22 + c.w12 * c.s12 * c.w12 +
               c.w12 * c.s22 * c.w22);
  const double k22 =
      c.w22 - (c.w12 * c.s11 * c.w12 + 2.0 * c.w12 * c.s12 * c.w22 + c.w22 * c.s22 * c.w22);

  const Vec ux = c.m_a - c.ex * stats.m_gx;  // ∂S̃ against ã
  const Vec uy = c.m_b - c.ey * stats.m_gy;  // ∂S̃ against b̃

  const double half_n = 0.5 * c.n;
  Vec g(ScaledParams::dim(J));
  double q_alpha_sum = 0.0;
  for (int jj = 0; jj < J; ++jj) {
    const double pj = 2.0 * (c.w11 * ux[jj] + c.w12 * uy[jj]);
    const double qj = 2.0 * (c.w12 * ux[jj] + c.w22 * uy[jj]);
    g[jj] = -half_n * (pj + p.beta_t * qj) / s_g[jj];
    g[J + jj] = -half_n * qj / s_g[jj];
    q_alpha_sum += qj * p.alpha_t[jj] / s_g[jj];
  }

  // β̃ enters both Σ̃ and the residual coefficients b̃.
  g[2 * J] = -half_n * (2.0 * k12 * c.u1 + k22 * (2.0 * p.beta_t + 2.0 * c.gyx * p.gamma_x_t) +
                        q_alpha_sum);

  // log σ_X, log σ_Y: the explicit 2·log σ terms plus the e_x/e_y dependence
  // of the scale-free residual moments.
  const double ds11_x = -2.0 * c.ex * c.ex * stats.m_xx + 2.0 * c.ex * c.a_t.dot(stats.m_gx);
  const double ds12_x = -c.ex * c.ey * stats.m_xy + c.ex * c.b_t.dot(stats.m_gx);
  const double ds22_y = -2.0 * c.ey * c.ey * stats.m_yy + 2.0 * c.ey * c.b_t.dot(stats.m_gy);
  const double ds12_y = -c.ex * c.ey * stats.m_xy + c.ey * c.a_t.dot(stats.m_gy);
  g[2 * J + 1] = -half_n * (2.0 + c.w11 * ds11_x + 2.0 * c.w12 * ds12_x);
  g[2 * J + 2] = -half_n * (2.0 + c.w22 * ds22_y + 2.0 * c.w12 * ds12_y);

  g[2 * J + 3] = -half_n * (2.0 * k11 * p.gamma_x_t +
                            2.0 * k12 * (2.0 * p.beta_t * p.gamma_x_t + p.gamma_y_t) +
                            2.0 * k22 * c.gyx * p.beta_t);
  g[2 * J + 4] = -half_n * (2.0 * k12 * p.gamma_x_t + 2.0 * k22 * c.gyx);
  return g;
}

}  // namespace massive
