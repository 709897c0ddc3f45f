#pragma once

// Shared helpers for the test binaries. Random inputs are built on the
// library Rng so every test is bit-reproducible across platforms and reruns.

#include <cstdint>

#include "massive/ingest.hpp"
#include "massive/rng.hpp"
#include "massive/types.hpp"

namespace test_util {

// Structural-model rows with binomial genotypes and moderate confounding.
// Instrument strengths and allele frequencies vary per column so the
// candidate covariance is comfortably nonsingular at small n.
inline massive::DataRows random_rows(massive::Rng& rng, int j, std::int64_t n,
                                     double beta = 0.3, double gamma = 0.7) {
  massive::DataRows rows;
  rows.g.resize(n, j);
  rows.x.resize(n);
  rows.y.resize(n);
  for (std::int64_t i = 0; i < n; ++i) {
    double gx = 0.0;
    for (int c = 0; c < j; ++c) {
      const double p = 0.2 + 0.6 * (c + 1.0) / (j + 1.0);
      const int g = rng.next_binomial(2, p);
      rows.g(i, c) = g;
      gx += (0.6 + 0.1 * c) * g;
    }
    const double u = rng.next_normal();
    rows.x[i] = gx + gamma * u + rng.next_normal();
    rows.y[i] = beta * rows.x[i] + gamma * u + rng.next_normal();
  }
  return rows;
}

inline massive::SufficientStats random_stats(massive::Rng& rng, int j, std::int64_t n,
                                             double beta = 0.3, double gamma = 0.7) {
  return massive::moments_from_rows(random_rows(rng, j, n, beta, gamma));
}

// Random parameter vector on the scaled side, kept within the region where
// the likelihood and prior are comfortably finite.
inline massive::ScaledParams random_params(massive::Rng& rng, int j) {
  massive::ScaledParams p;
  p.alpha_t.resize(j);
  p.kappa_t.resize(j);
  for (int c = 0; c < j; ++c) {
    p.alpha_t[c] = rng.next_normal();
    p.kappa_t[c] = 0.3 * rng.next_normal();
  }
  p.beta_t = 0.5 * rng.next_normal();
  p.log_sd_x = 0.3 * rng.next_normal();
  p.log_sd_y = 0.3 * rng.next_normal();
  p.gamma_x_t = rng.next_normal();
  p.gamma_y_t = rng.next_normal();
  return p;
}

}  // namespace test_util
