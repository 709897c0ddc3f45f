#pragma once

#include "massive/types.hpp"

namespace massive {

// Raw conditional second moments of (X, Y) given G, together with the
// through-origin regression coefficients they derive from:
//   rx = E[GGᵀ]⁻¹ E[GX],  var_x_g = E[X²] − E[XG]·rx,  etc.
// Location is deliberately not special-cased: the structural model has no
// intercepts, so means enter through the raw moments. Analyses that want an
// intercept add a constant candidate column at ingestion, which makes these
// raw conditional moments coincide with the familiar centered ones.
struct ConditionalMoments {
  Vec rx;            // length-J regression coefficients of X on G
  Vec ry;            // length-J regression coefficients of Y on G
  double var_x_g = 0.0;
  double var_y_g = 0.0;
  double cov_xy_g = 0.0;
};

ConditionalMoments conditional_moments(const SufficientStats& stats);

// Model-implied conditional covariance of (X, Y) given G:
//   Σ11 = σ_X²(1+γ̃_X²)
//   Σ12 = σ_X σ_Y (β̃(1+γ̃_X²) + γ̃_X γ̃_Y)
//   Σ22 = σ_Y²(1 + β̃² + (γ̃_Y + β̃γ̃_X)²)
// Symmetric positive definite for all finite parameters.
Eigen::Matrix2d model_sigma(const ScaledParams& p);

// Conditional Gaussian log-likelihood evaluated purely from sufficient
// statistics: −(n/2)·[log(4π²|Σ|) + tr(Σ⁻¹S)], where S is the raw residual
// second-moment matrix of (X − aᵀG, Y − bᵀG) and a, b are the data-scale
// mean coefficients implied by p. Never touches per-row data.
//
// Throws error(errc::numerical) if Σ is numerically singular (impossible for
// finite parameters; guards against overflow). Returns −inf if the residual
// algebra overflows, so optimizers treat such points as infeasible.
double log_likelihood(const SufficientStats& stats, const ScaledParams& p);

// Analytic gradient of log_likelihood with respect to the packed ScaledParams
// coordinates (see ScaledParams::pack for the ordering).
Vec log_likelihood_grad(const SufficientStats& stats, const ScaledParams& p);

}  // namespace massive
