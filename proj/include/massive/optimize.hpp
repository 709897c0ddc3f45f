#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "massive/types.hpp"

namespace massive {

using ValueFn = std::function<double(const Vec&)>;
using GradFn = std::function<Vec(const Vec&)>;

struct MaximizeOptions {
  int max_iters = 500;
  double grad_tol = 1e-6;  // infinity norm of the (masked) gradient
  int history = 8;  // L-BFGS memory
  // Modified-Newton polish rounds after L-BFGS stalls. Generous: the loop
  // exits on stall or convergence, and near-flat ridges (all-slab models,
  // where the prior only weakly breaks the likelihood manifold) can take
  // dozens of re-aimed Newton steps.
  int max_polish = 200;
  // Coordinates allowed to move; empty = all free. Fixed coordinates keep
  // their start value and are excluded from the convergence norm.
  std::vector<std::uint8_t> free_mask;
};

struct MaximizeResult {
  Vec x;
  double value = 0.0;
  Vec grad;
  bool converged = false;
  int iters = 0;
};

// Quasi-Newton ascent (L-BFGS two-loop recursion, Armijo backtracking) with a
// modified-Newton finishing stage. The finishing stage exists because at
// |objective| ~ n the line search cannot resolve improvements once the
// gradient is below ~sqrt(eps·|f|·curvature), which is far above grad_tol;
// Newton steps on the analytic gradient close that gap, with negative
// curvature flipped so the iteration climbs away from saddle points instead
// of converging onto them. Objective evaluations that throw
// error(errc::numerical) or return non-finite values are treated as
// infeasible points, not failures.
MaximizeResult maximize(const ValueFn& value_fn, const GradFn& grad_fn, const Vec& x0,
                        const MaximizeOptions& opts = {});

// Jacobian of grad_fn (≈ Hessian of the underlying scalar function) by
// central differences with per-coordinate step rel_step·max(1, |x_j|),
// symmetrized. Columns are independent; the parallel variant computes them
// with OpenMP and is bit-identical to the serial reference for any thread
// count.
Mat hessian_from_gradient(const GradFn& grad_fn, const Vec& x, double rel_step = 1e-5);
Mat hessian_from_gradient_serial(const GradFn& grad_fn, const Vec& x, double rel_step = 1e-5);

}  // namespace massive
