#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "massive/posterior.hpp"
#include "massive/types.hpp"

namespace massive {

// Independent Bernoulli(rate) prior over the J indicators. rate = 0.5 is the
// uniform prior over the 2^J models: a constant that cancels from every
// ratio, kept explicit so other rates slot in unchanged.
double model_log_prior(const ModelIndicator& m, double rate);

// Evidence store: one entry per visited model, successful or failed. Evidence
// is a pure function of (stats, model, hyper), so each model is computed at
// most once per run; failures are remembered so a bad model is never retried
// and warned about exactly once.
class EvidenceCache {
 public:
  // nullptr if the model is unknown or its computation failed.
  const ModelEvidence* find(const ModelIndicator& m) const;
  // true also for cached failures.
  bool known(const ModelIndicator& m) const;
  // Looks up, computing (and recording) on a miss. nullptr on failure.
  const ModelEvidence* get_or_compute(const SufficientStats& stats, const ModelIndicator& m,
                                      const Hyperparams& h);
  // Record a result computed elsewhere (the greedy scan computes neighbor
  // evidences in parallel slots and merges them in index order).
  void insert(const ModelIndicator& m, ModelEvidence ev);
  void insert_failure(const ModelIndicator& m, const std::string& why);

  // Successful evidences in ascending-bitmask order (deterministic).
  std::vector<const ModelEvidence*> successes() const;
  std::size_t size() const { return entries_.size(); }
  std::size_t failure_count() const;
  // Completed computations; equals size() exactly when nothing was computed
  // twice, which is asserted by tests.
  std::uint64_t compute_count() const { return computed_; }

 private:
  std::map<std::uint64_t, std::optional<ModelEvidence>> entries_;
  std::uint64_t computed_ = 0;
};

// Coordinate ascent over indicators: from the all-spike model, repeatedly
// flip the single indicator with the largest posterior-score gain until no
// flip improves (ties to the lowest index). Neighbor evidences are computed
// in parallel; everything evaluated lands in the cache.
ModelIndicator greedy_search(const SufficientStats& stats, const Hyperparams& h,
                             EvidenceCache& cache, double model_prior_rate = 0.5);

struct SearchTrace {
  std::vector<ModelIndicator> chain;  // start state, then the state after each step
  std::int64_t accepted_count = 0;
  std::uint64_t seed = 0;
};

// Metropolis over model space: propose a uniform 1-flip neighbor, accept with
// min{1, p(M'|D)/p(M|D)}. Consumes exactly two uniforms per iteration (the
// proposal index and the acceptance draw, the latter consumed even for
// certain accepts) so the stream position is a pure function of the
// iteration count. Proposals whose evidence fails are rejected.
SearchTrace mc3_search(const SufficientStats& stats, ModelIndicator start, std::int64_t iters,
                       std::uint64_t seed, const Hyperparams& h, EvidenceCache& cache,
                       double model_prior_rate = 0.5);

// Keep the models whose posterior score is within log(ratio) of the best.
// Sorted by descending score (ascending bitmask on ties); always contains the
// argmax model.
std::vector<ModelEvidence> occams_window_prune(const EvidenceCache& cache, double ratio,
                                               double model_prior_rate = 0.5);

struct BmaModel {
  ModelEvidence evidence;
  double weight = 0.0;                    // normalized posterior model probability
  std::vector<double> component_weights;  // softmax of component masses, for sampling
};

struct BmaPosterior {
  std::vector<BmaModel> models;  // descending weight
  Hyperparams hyper;
  double model_prior_rate = 0.5;
  int j = 0;
};

// Normalized model weights: softmax of log evidence + log model prior over
// the pruned set.
BmaPosterior bma_posterior(const std::vector<ModelEvidence>& pruned, const Hyperparams& h,
                           double model_prior_rate = 0.5);

// P(δ_j = 1 | data) = total weight of the models with indicator j set.
Vec inclusion_probabilities(const BmaPosterior& bma);

struct PosteriorDraw {
  ScaledParams params;
  double beta = 0.0;  // causal effect on the data scale
};

// Mixture sampling: model by weight, component by mass, then a multivariate
// normal draw from the component's mode and inverse curvature. Per draw the
// stream consumes exactly 2 uniforms + d normals, in that order.
std::vector<PosteriorDraw> sample_posterior(const BmaPosterior& bma, std::int64_t n_samples,
                                            std::uint64_t seed);

// Median of the causal-effect draws (lower-middle convention for even
// counts), and the central interval of given mass via linearly interpolated
// quantiles.
double point_estimate(const std::vector<PosteriorDraw>& samples);
std::pair<double, double> central_interval(const std::vector<PosteriorDraw>& samples,
                                           double mass = 0.9);
double median_of(std::vector<double> values);
double quantile_of(std::vector<double> values, double p);

struct RunConfig {
  std::uint64_t seed = 0;
  std::int64_t mc3_iters = 1000;
  double occam_ratio = 20.0;
  std::int64_t n_samples = 100000;
  // Explicit prior scales; when absent they are calibrated from the data.
  std::optional<std::pair<double, double>> hyper_override;  // (sd_slab, sd_spike)
  double model_prior_rate = 0.5;
  SlabFactorMode slab_factor = SlabFactorMode::literal_101;
  double var_weak = 10.0;

  void validate() const;
};

struct RunResult {
  Hyperparams hyper;
  BmaPosterior bma;
  Vec inclusion;
  std::vector<PosteriorDraw> samples;
  SearchTrace trace;
  std::size_t models_evaluated = 0;
  std::size_t models_failed = 0;
};

// The full pipeline: calibrate hyperparameters, greedy warm start, MC3,
// Occam's window, BMA assembly, posterior sampling. Sub-stream 1 of the seed
// drives the chain, sub-stream 2 the draws. Fatal sub-errors are rethrown
// with the failing stage prepended.
RunResult run_massive(const SufficientStats& stats, const RunConfig& config);

// Same pipeline with the model search pinned to one indicator — the all-slab
// Gaussian-prior baseline, or an oracle indicator in benchmarks.
RunResult fit_single_model(const SufficientStats& stats, const ModelIndicator& m,
                           const RunConfig& config);

}  // namespace massive
