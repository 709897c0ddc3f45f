#include "massive/ml_manifold.hpp"

#include <cmath>

#include "massive/log.hpp"

namespace massive {

namespace {

// Shared tail of the two data-driven start points: both reduce to "find the
// manifold point whose confounder coordinates have equal magnitude and whose
// product is determined by a residual correlation rho". Solving the manifold
// algebra for γ̃_Xγ̃_Y = P with |γ̃_X| = |γ̃_Y| gives |P| = |rho|/(1 − |rho|),
// with the sign of rho carried by γ̃_Y (γ̃_X kept nonnegative).
ScaledParams point_from_rho(const SufficientStats& stats, double rho, const char* what) {
  require(std::isfinite(rho) && std::abs(rho) < 1.0 - 1e-12, errc::degenerate_input,
          std::string("degenerate confounding constraint (|correlation| >= 1) in ") + what);
  const double mag = std::sqrt(std::abs(rho) / (1.0 - std::abs(rho)));
  return ml_given_confounding(stats, mag, std::copysign(mag, rho));
}

}  // namespace

ScaledParams ml_given_confounding(const SufficientStats& stats, double gx, double gy) {
  require(std::isfinite(gx) && std::isfinite(gy), errc::precondition,
          "confounding coefficients must be finite");
  const ConditionalMoments cm = conditional_moments(stats);
  const double u1 = 1.0 + gx * gx;

  const double var_x = cm.var_x_g / u1;
  const double var_y =
      (cm.var_y_g - cm.cov_xy_g * cm.cov_xy_g / cm.var_x_g) * u1 / (u1 + gy * gy);
  // conditional_moments guarantees PD, so both variances are positive.
  const double sd_x = std::sqrt(var_x);
  const double sd_y = std::sqrt(var_y);
  const double beta_t = (cm.cov_xy_g / (sd_x * sd_y) - gx * gy) / u1;

  const Vec s_g = stats.scale_g();
  ScaledParams p;
  p.alpha_t = s_g.cwiseProduct(cm.rx) / sd_x;
  p.kappa_t = s_g.cwiseProduct(cm.ry) / sd_y - beta_t * p.alpha_t;
  p.beta_t = beta_t;
  p.log_sd_x = std::log(sd_x);
  p.log_sd_y = std::log(sd_y);
  p.gamma_x_t = gx;
  p.gamma_y_t = gy;
  return p;
}

ScaledParams init_no_confounding(const SufficientStats& stats) {
  return ml_given_confounding(stats, 0.0, 0.0);
}

ScaledParams init_no_causal_effect(const SufficientStats& stats) {
  const ConditionalMoments cm = conditional_moments(stats);
  const double rho = cm.cov_xy_g / std::sqrt(cm.var_x_g * cm.var_y_g);
  return point_from_rho(stats, rho, "no-causal-effect start point");
}

ScaledParams init_min_pleiotropy(const SufficientStats& stats) {
  const ConditionalMoments cm = conditional_moments(stats);
  const double rx2 = cm.rx.squaredNorm();
  require(rx2 > 0, errc::degenerate_input,
          "all instrument strengths are zero; minimal-pleiotropy start point undefined");
  // Least-squares fit of the outcome associations on the exposure
  // associations; the returned manifold point implies exactly this
  // data-scale causal effect.
  const double beta_star = cm.rx.dot(cm.ry) / rx2;
  // Correlation of (X, Y − β*X) given G: the confounding needed to explain
  // the residual association once β* is taken as causal.
  const double resid_var =
      cm.var_y_g - 2.0 * beta_star * cm.cov_xy_g + beta_star * beta_star * cm.var_x_g;
  require(resid_var > 0, errc::inconsistent_input,
          "residual outcome variance is not positive");
  const double rho =
      (cm.cov_xy_g - beta_star * cm.var_x_g) / std::sqrt(cm.var_x_g * resid_var);
  return point_from_rho(stats, rho, "minimal-pleiotropy start point");
}

std::vector<ScaledParams> init_list(const SufficientStats& stats) {
  std::vector<ScaledParams> points;
  std::string first_failure;
  auto try_add = [&](ScaledParams (*make)(const SufficientStats&), const char* name) {
    try {
      ScaledParams p = make(stats);
      for (const ScaledParams& q : points) {
        const double dx = p.gamma_x_t - q.gamma_x_t;
        const double dy = p.gamma_y_t - q.gamma_y_t;
        if (std::sqrt(dx * dx + dy * dy) < 1e-6) return;  // duplicate
      }
      points.push_back(std::move(p));
    } catch (const error& e) {
      if (first_failure.empty()) first_failure = e.what();
      log_warn(std::string("start point '") + name + "' unavailable: " + e.what());
    }
  };
  try_add(&init_no_confounding, "no confounding");
  try_add(&init_no_causal_effect, "no causal effect");
  try_add(&init_min_pleiotropy, "minimal pleiotropy");
  require(!points.empty(), errc::degenerate_input,
          "no usable optimizer start point: " + first_failure);
  return points;
}

}  // namespace massive
