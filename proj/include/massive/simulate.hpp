#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "massive/ingest.hpp"
#include "massive/types.hpp"

namespace massive {

struct SimConfig {
  std::int64_t n = 1000;
  int j = 10;          // candidate count
  int k = 0;           // candidates with nonzero direct (pleiotropic) effects
  double beta = 0.0;   // true causal effect
  double sigma = 1.0;  // shared scale: γ_X = γ_Y = σ_X = σ_Y
  int ploidy = 2;      // allele copies per variant
  std::uint64_t seed = 0;
  bool directional = false;  // force all pleiotropic signs positive
  bool gaussian_g = false;   // moment-matched continuous variants (stress mode)

  void validate() const;
};

struct SimData {
  DataRows rows;
  UnscaledParams truth;  // the exact generating parameters
};

// Synthetic dataset from the structural model with randomized per-candidate
// settings: p_j ~ U(0.1, 0.9), G_j ~ Binomial(ploidy, p_j), instrument
// strengths α_j = 0.5 + |N(0, 0.5²)|, direct effects κ_j = ±|N(0, 0.2²)| for
// the first k candidates (independent random sign unless directional) and 0
// otherwise. The RNG stream order is fixed and documented so seeds are
// portable across modes:
//   1. J uniforms for p_j
//   2. J normals for α_j
//   3. per j < k: one normal (magnitude) then one uniform (sign — consumed
//      even in directional mode so the two modes share genotype streams)
//   4. per row: J genotype draws (ploidy uniforms each; 1 normal each in
//      gaussian mode), then normals U, ε_X, ε_Y.
SimData simulate_dataset(const SimConfig& c);

// Confounded baseline: the plain regression slope Cov(X,Y)/Var(X).
double observational_estimate(const SufficientStats& stats);

// Inverse-variance-weighted mean of the per-candidate ratio estimates
// r_y/r_x with weights r_x²/se_y². Candidates with exactly zero instrument
// strength are excluded with a warning.
double ivw_estimate(const Vec& r_x, const Vec& r_y, const Vec& se_y);

// One replicate's worth of shared inputs handed to each estimator.
struct BenchContext {
  const SimConfig& config;  // seed already substituted for this replicate
  const DataRows& rows;
  const SufficientStats& stats;
  const UnscaledParams& truth;
  std::uint64_t rep_seed = 0;  // derive estimator-internal sub-seeds from this
};

// A named β estimator; throwing marks the replicate failed for that
// estimator. The registry form keeps the benchmark harness open to stub
// estimators in tests.
using Estimator = std::function<double(const BenchContext&)>;

// massive (full model-averaged fit, posterior median), gaussian (single
// all-slab model), oracle (single model with the true indicators), ivw,
// observational, truth.
std::map<std::string, Estimator> default_estimators();

struct BenchRow {
  SimConfig config;
  std::string estimator;
  double rmse = 0.0;
  double ci_low = 0.0;   // nonparametric bootstrap, central 95%
  double ci_high = 0.0;
  int failures = 0;
  int reps = 0;
};

// For each config: reps replicates, seeded mix(master_seed, cfg·100003 + rep),
// each estimator applied to the same data; failures are excluded from the
// RMSE and counted. The bootstrap CI resamples the per-replicate squared
// errors 1000 times. Replicates run in parallel into per-slot storage, so
// results are identical for any thread count.
std::vector<BenchRow> rmse_benchmark(const std::vector<SimConfig>& configs, int reps,
                                     const std::map<std::string, Estimator>& estimators,
                                     std::uint64_t master_seed);

// CSV rendering: n,j,k,valid,beta,sigma,estimator,rmse,ci_low,ci_high,failures
// (valid = j − k; both counts are reported because "how many candidates are
// pleiotropic" and "how many instruments are valid" are easy to mix up).
// Rows whose every replicate failed leave the numeric cells empty.
std::string benchmark_csv(const std::vector<BenchRow>& rows);

}  // namespace massive
