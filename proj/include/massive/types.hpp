#pragma once

#include <cstdint>
#include <string>

#include <Eigen/Dense>

#include "massive/errors.hpp"

namespace massive {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

// First and second raw moments of (G, X, Y) plus the sample size. This is the
// sole data interface to all inference: both individual-level rows and
// summary-statistic reconstructions funnel into this one type. Raw
// (uncentered) moments are the storage format; centered quantities are
// derived on demand.
struct SufficientStats {
  std::int64_t n = 0;
  Vec mean_g;            // E[G_j]
  double mean_x = 0.0;   // E[X]
  double mean_y = 0.0;   // E[Y]
  Mat m_gg;              // E[G Gᵀ], raw
  Vec m_gx;              // E[G X]
  Vec m_gy;              // E[G Y]
  double m_xx = 0.0;     // E[X²]
  double m_yy = 0.0;     // E[Y²]
  double m_xy = 0.0;     // E[XY]

  int j() const { return static_cast<int>(mean_g.size()); }

  // Centered covariance of the candidates, Var(G) = E[GGᵀ] − E[G]E[G]ᵀ.
  Mat cov_g() const { return m_gg - mean_g * mean_g.transpose(); }
  double var_x() const { return m_xx - mean_x * mean_x; }
  double var_y() const { return m_yy - mean_y * mean_y; }
  double cov_xy() const { return m_xy - mean_x * mean_y; }

  // Per-candidate scale σ_{G_j} used by the scaled parameterization. A
  // (near-)constant column — the intercept convention — keeps unit scale so
  // the scaled/unscaled transform stays a bijection.
  Vec scale_g() const;

  // Shape and positive-definiteness checks (raw E[GGᵀ] must admit a Cholesky
  // factorization). Throws error(errc::degenerate_input) on violation.
  void validate() const;
};

// Parameters of the structural equation model on the data scale:
//   X = Σ_j α_j G_j + γ_X U + ε_X,  ε_X ~ N(0, σ_X²)
//   Y = Σ_j κ_j G_j + β X + γ_Y U + ε_Y,  ε_Y ~ N(0, σ_Y²)
// with U ~ N(0,1) latent.
struct UnscaledParams {
  Vec alpha;             // instrument strengths α_j
  Vec kappa;             // pleiotropic (direct) effects κ_j
  double beta = 0.0;     // causal effect β
  double gamma_x = 0.0;  // confounder loading on X
  double gamma_y = 0.0;  // confounder loading on Y
  double sd_x = 1.0;     // σ_X > 0
  double sd_y = 1.0;     // σ_Y > 0

  int j() const { return static_cast<int>(alpha.size()); }
};

// Scale-free parameterization η̃ = (α̃, κ̃, β̃, log σ_X, log σ_Y, γ̃_X, γ̃_Y),
// total dimension d = 2J + 5. This is the coordinate system for all
// optimization and posterior evaluation. pack()/unpack() fix the flat
// ordering used by gradients and Hessians:
//   [0, J)      α̃
//   [J, 2J)     κ̃
//   2J          β̃
//   2J+1, 2J+2  log σ_X, log σ_Y
//   2J+3, 2J+4  γ̃_X, γ̃_Y
struct ScaledParams {
  Vec alpha_t;
  Vec kappa_t;
  double beta_t = 0.0;
  double log_sd_x = 0.0;
  double log_sd_y = 0.0;
  double gamma_x_t = 0.0;
  double gamma_y_t = 0.0;

  int j() const { return static_cast<int>(alpha_t.size()); }
  static int dim(int j) { return 2 * j + 5; }

  Vec pack() const;
  static ScaledParams unpack(const Vec& v);
};

ScaledParams scale_params(const UnscaledParams& p, const Vec& sd_g);
UnscaledParams unscale_params(const ScaledParams& p, const Vec& sd_g);

// Causal effect on the data scale implied by a scaled parameter vector:
// β = exp(log σ_Y − log σ_X) · β̃. Does not need sd_g.
inline double unscaled_beta(const ScaledParams& p) {
  return std::exp(p.log_sd_y - p.log_sd_x) * p.beta_t;
}

// One assignment of the J spike/slab indicators δ ∈ {0,1}^J (1 = slab =
// relevant pleiotropic effect). Encoded as a bitmask so the 2^J model space
// has injective integer keys; J ≤ 64 is a hard limit.
struct ModelIndicator {
  std::uint64_t bits = 0;
  int j = 0;

  static constexpr int max_j = 64;

  static ModelIndicator all_spike(int j);
  static ModelIndicator all_slab(int j);

  bool slab(int idx) const { return (bits >> idx) & 1ull; }
  ModelIndicator with_flip(int idx) const;
  int slab_count() const;
  std::string to_hex() const;  // "0x1f" — JSON-safe for J > 53

  friend bool operator==(const ModelIndicator& a, const ModelIndicator& b) {
    return a.bits == b.bits && a.j == b.j;
  }
};

// Prior scales: spike-and-slab standard deviations for the pleiotropic
// effects (the slab also covers the instrument strengths α̃), and the
// weakly-informative prior variance for β̃, γ̃_X, γ̃_Y.
struct Hyperparams {
  double sd_slab = 1.0;
  double sd_spike = 0.1;
  double var_weak = 10.0;

  void validate() const {
    require(sd_spike > 0 && sd_slab > sd_spike, errc::precondition,
            "hyperparameters must satisfy 0 < sd_spike < sd_slab");
    require(var_weak > 0, errc::precondition, "var_weak must be positive");
  }
};

}  // namespace massive
