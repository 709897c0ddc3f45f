#pragma once

#include <utility>
#include <vector>

#include "massive/likelihood.hpp"
#include "massive/types.hpp"

namespace massive {

// How the slab-variance calibration factor is chosen. The literal constant
// 101 reproduces the published calibration; the derived mode uses
// 1 + var_weak, which is E[1 + γ̃_X²] under γ̃_X ~ N(0, var_weak).
enum class SlabFactorMode { literal_101, one_plus_var_weak };

// Data-driven spike/slab scales. The slab variance matches the average
// squared scaled instrument strength (times the calibration factor); the
// spike follows by solving, for C = (σ_slab/σ_spike)²,
//   (n + 1 − C)·(factor·min_j D_j²/σ_slab)² + log C = 0,
// which has a unique root C > 1. The effective sample size n is a separate
// argument so callers may override the one recorded in stats.
Hyperparams empirical_hyperparams(const SufficientStats& stats, std::int64_t n,
                                  SlabFactorMode mode = SlabFactorMode::literal_101,
                                  double var_weak = 10.0);

// Log prior density of the continuous parameters given the model:
// N(0, σ_slab²) on each α̃_j, N(0, σ_slab²) or N(0, σ_spike²) on each κ̃_j by
// its indicator, N(0, var_weak) on β̃, γ̃_X, γ̃_Y, improper flat on the log
// scales (their infinite normalization constant is shared by every model and
// cancels from all evidence ratios and weights, so it is dropped).
double log_prior(const ScaledParams& p, const ModelIndicator& m, const Hyperparams& h);

// Unnormalized log posterior and its analytic gradient in packed coordinates.
double log_posterior(const SufficientStats& stats, const ScaledParams& p,
                     const ModelIndicator& m, const Hyperparams& h);
Vec grad_log_posterior(const SufficientStats& stats, const ScaledParams& p,
                       const ModelIndicator& m, const Hyperparams& h);

struct PosteriorMode {
  ScaledParams params;
  double log_post = 0.0;
};

// Local maxima of the posterior, found by quasi-Newton ascent from the
// manifold start points. The posterior is symmetric under the confounder
// sign flip, so modes come in mirrored pairs (origin modes are their own
// mirror); the returned list is closed under the flip, sorted by descending
// log posterior, and capped at 5 entries (weakest flip-closed groups dropped
// with a warning). With exploit_symmetry the search canonicalizes to the
// γ̃_X ≥ 0 half-space before mirroring; without it, found modes are kept
// as-is and mirrored afterwards — the result set is the same, which is
// tested.
std::vector<PosteriorMode> find_local_optima(const SufficientStats& stats,
                                             const ModelIndicator& m, const Hyperparams& h,
                                             bool exploit_symmetry = true);

// One Laplace-approximation component: a mode, the log-determinant of the
// negative Hessian there, and the implied Gaussian mass
//   log_mass = log_post + (d/2)·log 2π − ½·log|H|.
// Near-singular Hessians are repaired by flooring eigenvalues at 1e-8 of the
// largest (flat directions occur when a κ̃_j sits between the spike and slab
// scales); a fully floored spectrum is an error.
struct LaplaceComponent {
  ScaledParams mode;
  double log_post_at_mode = 0.0;
  double log_det_hessian = 0.0;
  double log_mass = 0.0;
  int floored = 0;
  Mat sample_transform;  // V·diag(λ^{-1/2}): maps standard normals to draws
};

LaplaceComponent laplace_component(const SufficientStats& stats, const ScaledParams& mode,
                                   const ModelIndicator& m, const Hyperparams& h);

// Evidence of one model: log-sum-exp of its component masses (each member of
// a mirrored pair counts once).
struct ModelEvidence {
  ModelIndicator model;
  double log_evidence = 0.0;
  std::vector<LaplaceComponent> components;
};

ModelEvidence model_evidence(const SufficientStats& stats, const ModelIndicator& m,
                             const Hyperparams& h);

// Optimal log posterior over the remaining 2J+3 coordinates for each fixed
// confounder pair, started from the manifold point. Failed cells are NaN.
// The parallel variant distributes cells with OpenMP and is bit-identical to
// the serial reference.
std::vector<double> profile_posterior_grid(const SufficientStats& stats,
                                           const ModelIndicator& m, const Hyperparams& h,
                                           const std::vector<std::pair<double, double>>& cells);
std::vector<double> profile_posterior_grid_serial(
    const SufficientStats& stats, const ModelIndicator& m, const Hyperparams& h,
    const std::vector<std::pair<double, double>>& cells);

double log_sum_exp(const std::vector<double>& values);

}  // namespace massive
