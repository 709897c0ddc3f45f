#pragma once

#include <vector>

#include "massive/likelihood.hpp"
#include "massive/types.hpp"

namespace massive {

// For fixed confounding coefficients (γ̃_X, γ̃_Y), the likelihood has a unique
// closed-form maximizer; sweeping (γ̃_X, γ̃_Y) traces out a two-dimensional
// manifold of parameter vectors that all attain the same (global) maximum
// likelihood. These functions compute points on that manifold; they are the
// optimizer's start points.
ScaledParams ml_given_confounding(const SufficientStats& stats, double gx, double gy);

// The three preset start points:
//  - no confounding:     (γ̃_X, γ̃_Y) = (0, 0)
//  - no causal effect:   the manifold point whose β̃ is exactly zero
//  - minimal pleiotropy: the manifold point whose implied data-scale causal
//    effect equals the least-squares fit β* of ry on rx
ScaledParams init_no_confounding(const SufficientStats& stats);
ScaledParams init_no_causal_effect(const SufficientStats& stats);
ScaledParams init_min_pleiotropy(const SufficientStats& stats);

// The available subset of the three start points, with near-duplicates
// (confounder coordinates within 1e-6) collapsed. Throws only if every point
// is degenerate.
std::vector<ScaledParams> init_list(const SufficientStats& stats);

}  // namespace massive
