#include "massive/posterior.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <string>
#include <vector>

#include "massive/log.hpp"
#include "massive/ml_manifold.hpp"
#include "massive/optimize.hpp"
#include "massive/parallel.hpp"

namespace massive {

namespace {

constexpr double log_2pi = 1.8378770664093455;
constexpr int max_components = 5;
constexpr double origin_tol = 1e-4;  // ‖(γ̃_X, γ̃_Y)‖ below this = self-mirrored
constexpr double dedupe_tol = 1e-4;  // modes are identified by their confounder pair

double normal_logpdf(double x, double var) {
  return -0.5 * (log_2pi + std::log(var) + x * x / var);
}

ScaledParams mirrored(ScaledParams p) {
  p.gamma_x_t = -p.gamma_x_t;
  p.gamma_y_t = -p.gamma_y_t;
  return p;
}

double gamma_dist(const ScaledParams& p, double gx, double gy) {
  return std::hypot(p.gamma_x_t - gx, p.gamma_y_t - gy);
}

}  // namespace

double log_sum_exp(const std::vector<double>& values) {
  require(!values.empty(), errc::precondition, "log_sum_exp needs at least one term");
  const double mx = *std::max_element(values.begin(), values.end());
  if (!std::isfinite(mx)) return mx;  // covers the all -inf case
  double acc = 0.0;
  for (double v : values) acc += std::exp(v - mx);
  return mx + std::log(acc);
}

Hyperparams empirical_hyperparams(const SufficientStats& stats, std::int64_t n,
                                  SlabFactorMode mode, double var_weak) {
  require(n >= 1, errc::precondition, "effective sample size must be positive");
  require(var_weak > 0.0, errc::precondition, "var_weak must be positive");
  const ConditionalMoments cm = conditional_moments(stats);
  const Vec s = stats.scale_g();
  const int j = stats.j();

  // Squared scaled ML strengths D_j² = σ_{G_j}²(α_j^ML)²/Var(X|G). The slab
  // matches their average so the prior does not fight the likelihood's own
  // scale; the spike calibration keyed to the weakest candidate needs every
  // D_j² to be nonzero.
  Vec d2(j);
  for (int jj = 0; jj < j; ++jj) d2[jj] = s[jj] * s[jj] * cm.rx[jj] * cm.rx[jj] / cm.var_x_g;
  const double min_d2 = d2.minCoeff();
  require(min_d2 > 0.0, errc::hyperparameter_failure,
          "spike calibration needs a nonzero ML strength for every candidate");

  const double factor = mode == SlabFactorMode::literal_101 ? 101.0 : 1.0 + var_weak;
  const double sd_slab = std::sqrt(factor / j * d2.sum());

  // Solve (n + 1 − C)k² + log C = 0 for the variance ratio C = (σ_slab/σ_spike)²
  // with k the scaled prior variance of the weakest effect. f(1) = nk² > 0 and
  // f is unimodal with f → −∞, so there is exactly one root and it is > 1.
  const double k = factor * min_d2 / sd_slab;
  const double k2 = k * k;
  const auto f = [&](double c) { return (static_cast<double>(n) + 1.0 - c) * k2 + std::log(c); };

  double lo = 1.0, hi = 2.0;
  for (int grow = 0; !(f(hi) <= 0.0); ++grow) {
    hi *= 2.0;
    require(grow < 1024 && std::isfinite(hi), errc::hyperparameter_failure,
            "spike ratio equation has no bracketable root");
  }
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    (f(mid) > 0.0 ? lo : hi) = mid;
  }
  double c = 0.5 * (lo + hi);
  for (int it = 0; it < 8; ++it) {  // Newton polish: push |f| to the FP floor
    const double fp = 1.0 / c - k2;  // negative at the root (right of the max)
    const double next = c - f(c) / fp;
    if (!(next > 1.0) || !std::isfinite(next)) break;
    c = next;
  }
  require(c > 1.0 && std::isfinite(c), errc::hyperparameter_failure,
          "spike ratio equation produced an invalid root");

  Hyperparams out;
  out.sd_slab = sd_slab;
  out.sd_spike = sd_slab / std::sqrt(c);
  out.var_weak = var_weak;
  out.validate();
  return out;
}

double log_prior(const ScaledParams& p, const ModelIndicator& m, const Hyperparams& h) {
  h.validate();
  require(m.j == p.j(), errc::precondition, "model indicator and parameters disagree on J");
  const double v_slab = h.sd_slab * h.sd_slab;
  const double v_spike = h.sd_spike * h.sd_spike;
  double lp = 0.0;
  for (int jj = 0; jj < p.j(); ++jj) {
    lp += normal_logpdf(p.alpha_t[jj], v_slab);
    lp += normal_logpdf(p.kappa_t[jj], m.slab(jj) ? v_slab : v_spike);
  }
  lp += normal_logpdf(p.beta_t, h.var_weak);
  lp += normal_logpdf(p.gamma_x_t, h.var_weak);
  lp += normal_logpdf(p.gamma_y_t, h.var_weak);
  return lp;  // log σ_X, log σ_Y carry an improper flat prior: no contribution
}

double log_posterior(const SufficientStats& stats, const ScaledParams& p,
                     const ModelIndicator& m, const Hyperparams& h) {
  const double ll = log_likelihood(stats, p);
  if (!std::isfinite(ll)) return ll;
  return ll + log_prior(p, m, h);
}

Vec grad_log_posterior(const SufficientStats& stats, const ScaledParams& p,
                       const ModelIndicator& m, const Hyperparams& h) {
  h.validate();
  require(m.j == p.j(), errc::precondition, "model indicator and parameters disagree on J");
  Vec g = log_likelihood_grad(stats, p);
  const double v_slab = h.sd_slab * h.sd_slab;
  const double v_spike = h.sd_spike * h.sd_spike;
  const int j = p.j();
  for (int jj = 0; jj < j; ++jj) {
    g[jj] -= p.alpha_t[jj] / v_slab;
    g[j + jj] -= p.kappa_t[jj] / (m.slab(jj) ? v_slab : v_spike);
  }
  g[2 * j] -= p.beta_t / h.var_weak;
  g[2 * j + 3] -= p.gamma_x_t / h.var_weak;
  g[2 * j + 4] -= p.gamma_y_t / h.var_weak;
  return g;
}

std::vector<PosteriorMode> find_local_optima(const SufficientStats& stats,
                                             const ModelIndicator& m, const Hyperparams& h,
                                             bool exploit_symmetry) {
  const auto value_fn = [&](const Vec& x) {
    return log_posterior(stats, ScaledParams::unpack(x), m, h);
  };
  const auto grad_fn = [&](const Vec& x) {
    return grad_log_posterior(stats, ScaledParams::unpack(x), m, h);
  };

  std::vector<PosteriorMode> found;
  const std::vector<ScaledParams> starts = init_list(stats);
  for (std::size_t i = 0; i < starts.size(); ++i) {
    MaximizeResult res;
    try {
      res = maximize(value_fn, grad_fn, starts[i].pack());
    } catch (const error& e) {
      log_warn("posterior ascent failed from start point " + std::to_string(i) + ": " +
               e.what());
      continue;
    }
    if (!res.converged || !std::isfinite(res.value)) {
      log_warn("posterior ascent from start point " + std::to_string(i) +
               " did not reach the gradient tolerance");
      continue;
    }
    // The γ̃ = 0 plane is invariant under the sign-flip symmetry, so the
    // no-confounding start can park on a stationary point that is a saddle
    // between the mirrored true modes. Only genuine local maxima qualify as
    // Laplace components; an indefinite point would have its negative
    // curvature floored away and report wildly inflated mass.
    bool saddle = false;
    try {
      const Mat neg_hess = -hessian_from_gradient(grad_fn, res.x);
      Eigen::SelfAdjointEigenSolver<Mat> es(neg_hess);
      if (es.info() == Eigen::Success) {
        // Same scale as the laplace_component eigenvalue floor: anything a
        // flooring repair would have to lift from below that line is real
        // negative curvature, not finite-difference noise (which sits orders
        // of magnitude lower for an analytic-gradient central difference).
        const Vec lam = es.eigenvalues();
        saddle = lam.minCoeff() < -1e-8 * lam.cwiseAbs().maxCoeff();
      }
    } catch (const error& e) {
      if (e.kind() != errc::numerical) throw;
      log_warn("curvature check failed from start point " + std::to_string(i) + ": " +
               e.what());
      continue;
    }
    if (saddle) {
      log_warn("posterior ascent from start point " + std::to_string(i) +
               " reached a saddle point; excluded from the mode list");
      continue;
    }
    found.push_back({ScaledParams::unpack(res.x), res.value});
  }
  require(!found.empty(), errc::optimization_failure,
          "no posterior maximum could be located from any start point");

  // Canonicalize non-origin modes into the γ̃_X ≥ 0 half-space. The flipped
  // point is the exact mirror mode, so this is a relabeling, not a move.
  if (exploit_symmetry) {
    for (auto& f : found) {
      if (std::hypot(f.params.gamma_x_t, f.params.gamma_y_t) >= origin_tol &&
          (f.params.gamma_x_t < 0.0 ||
           (f.params.gamma_x_t == 0.0 && f.params.gamma_y_t < 0.0))) {
        f.params = mirrored(f.params);
        f.log_post = log_posterior(stats, f.params, m, h);
      }
    }
  }

  std::sort(found.begin(), found.end(), [](const PosteriorMode& a, const PosteriorMode& b) {
    if (a.log_post != b.log_post) return a.log_post > b.log_post;
    if (a.params.gamma_x_t != b.params.gamma_x_t)
      return a.params.gamma_x_t < b.params.gamma_x_t;
    return a.params.gamma_y_t < b.params.gamma_y_t;
  });

  // Mirror-aware dedupe: two results are the same flip orbit if their
  // confounder pairs (or one pair and the other's mirror image) coincide.
  std::vector<PosteriorMode> reps;
  for (const auto& f : found) {
    const auto dup = [&](const PosteriorMode& r) {
      return gamma_dist(f.params, r.params.gamma_x_t, r.params.gamma_y_t) < dedupe_tol ||
             gamma_dist(f.params, -r.params.gamma_x_t, -r.params.gamma_y_t) < dedupe_tol;
    };
    if (std::none_of(reps.begin(), reps.end(), dup)) reps.push_back(f);
  }

  // Emit flip-closed groups (origin modes are their own mirror) strongest
  // first, keeping whole groups while they fit under the component cap.
  std::vector<PosteriorMode> out;
  std::size_t dropped = 0;
  for (const auto& r : reps) {
    const bool origin = std::hypot(r.params.gamma_x_t, r.params.gamma_y_t) < origin_tol;
    const std::size_t size = origin ? 1 : 2;
    if (dropped == 0 && out.size() + size <= max_components) {
      out.push_back(r);
      if (!origin) {
        PosteriorMode twin;
        twin.params = mirrored(r.params);
        twin.log_post = log_posterior(stats, twin.params, m, h);
        out.push_back(twin);
      }
    } else {
      dropped += size;
    }
  }
  if (dropped > 0)
    log_warn("dropped " + std::to_string(dropped) + " weak posterior mode(s): keeping the " +
             std::to_string(out.size()) + " strongest of a cap of " +
             std::to_string(max_components));
  return out;
}

LaplaceComponent laplace_component(const SufficientStats& stats, const ScaledParams& mode,
                                   const ModelIndicator& m, const Hyperparams& h) {
  const Vec x = mode.pack();
  const int d = static_cast<int>(x.size());
  const Vec grad = grad_log_posterior(stats, mode, m, h);
  require(grad.lpNorm<Eigen::Infinity>() < 1e-4, errc::precondition,
          "laplace_component needs a stationary point (gradient too large)");

  const auto grad_fn = [&](const Vec& v) {
    return grad_log_posterior(stats, ScaledParams::unpack(v), m, h);
  };
  const Mat neg_hess = -hessian_from_gradient(grad_fn, x);
  Eigen::SelfAdjointEigenSolver<Mat> es(neg_hess);
  require(es.info() == Eigen::Success, errc::numerical,
          "eigendecomposition of the posterior Hessian failed");
  Vec lam = es.eigenvalues();
  const double lam_max = lam.maxCoeff();
  require(lam_max > 0.0, errc::numerical,
          "posterior curvature is not positive in any direction at the mode");

  // Flat directions (a κ̃_j parked between the spike and slab scales, or the
  // γ plane at an origin saddle) get their eigenvalues floored so the
  // component keeps a finite, conservative mass.
  const double floor = 1e-8 * lam_max;
  int floored = 0;
  for (int i = 0; i < d; ++i) {
    if (lam[i] < floor) {
      lam[i] = floor;
      ++floored;
    }
  }
  if (floored > 0)
    log_warn("floored " + std::to_string(floored) + " of " + std::to_string(d) +
             " Hessian eigenvalues at a posterior mode");

  LaplaceComponent comp;
  comp.mode = mode;
  comp.log_post_at_mode = log_posterior(stats, mode, m, h);
  comp.log_det_hessian = lam.array().log().sum();
  comp.log_mass = comp.log_post_at_mode + 0.5 * d * log_2pi - 0.5 * comp.log_det_hessian;
  comp.floored = floored;
  comp.sample_transform = es.eigenvectors() * lam.cwiseSqrt().cwiseInverse().asDiagonal();
  return comp;
}

ModelEvidence model_evidence(const SufficientStats& stats, const ModelIndicator& m,
                             const Hyperparams& h) {
  ModelEvidence ev;
  ev.model = m;
  std::vector<double> masses;
  for (const PosteriorMode& mode : find_local_optima(stats, m, h)) {
    ev.components.push_back(laplace_component(stats, mode.params, m, h));
    masses.push_back(ev.components.back().log_mass);
  }
  ev.log_evidence = log_sum_exp(masses);
  return ev;
}

namespace {

std::vector<double> profile_grid_impl(const SufficientStats& stats, const ModelIndicator& m,
                                      const Hyperparams& h,
                                      const std::vector<std::pair<double, double>>& cells,
                                      bool parallel) {
  stats.validate();
  h.validate();
  const int d = ScaledParams::dim(stats.j());
  MaximizeOptions opts;
  opts.free_mask.assign(d, 1);
  opts.free_mask[d - 2] = 0;  // γ̃_X fixed per cell
  opts.free_mask[d - 1] = 0;  // γ̃_Y fixed per cell

  const auto value_fn = [&](const Vec& x) {
    return log_posterior(stats, ScaledParams::unpack(x), m, h);
  };
  const auto grad_fn = [&](const Vec& x) {
    return grad_log_posterior(stats, ScaledParams::unpack(x), m, h);
  };

  std::vector<double> out(cells.size(), std::numeric_limits<double>::quiet_NaN());
  const auto cell = [&](std::int64_t i) {
    try {
      const ScaledParams start = ml_given_confounding(stats, cells[i].first, cells[i].second);
      const MaximizeResult res = maximize(value_fn, grad_fn, start.pack(), opts);
      if (res.converged && std::isfinite(res.value)) out[i] = res.value;
    } catch (...) {
      // cell stays NaN: a failed cell is reported missing, not fatal
    }
  };
  if (parallel) {
    parallel_for(static_cast<std::int64_t>(cells.size()), cell);
  } else {
    for (std::int64_t i = 0; i < static_cast<std::int64_t>(cells.size()); ++i) cell(i);
  }
  return out;
}

}  // namespace

std::vector<double> profile_posterior_grid(const SufficientStats& stats,
                                           const ModelIndicator& m, const Hyperparams& h,
                                           const std::vector<std::pair<double, double>>& cells) {
  return profile_grid_impl(stats, m, h, cells, true);
}

std::vector<double> profile_posterior_grid_serial(
    const SufficientStats& stats, const ModelIndicator& m, const Hyperparams& h,
    const std::vector<std::pair<double, double>>& cells) {
  return profile_grid_impl(stats, m, h, cells, false);
}

}  // namespace massive
