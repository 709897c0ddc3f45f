#include "massive/search.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <exception>
#include <limits>
#include <utility>

#include "massive/log.hpp"
#include "massive/parallel.hpp"
#include "massive/rng.hpp"

namespace massive {

namespace {

double model_score(const ModelEvidence& ev, double rate) {
  return ev.log_evidence + model_log_prior(ev.model, rate);
}

// Walk the cumulative distribution; the final index absorbs any rounding
// slack in the normalization.
template <class T, class W>
const T& pick_weighted(const std::vector<T>& items, const W& weight_of, double u) {
  double acc = 0.0;
  for (const T& item : items) {
    acc += weight_of(item);
    if (u < acc) return item;
  }
  return items.back();
}

template <class F>
auto with_stage(const char* stage, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const error& e) {
    fail(e.kind(), std::string(stage) + ": " + e.what());
  }
}

}  // namespace

double model_log_prior(const ModelIndicator& m, double rate) {
  require(rate > 0.0 && rate < 1.0, errc::precondition,
          "model prior rate must lie strictly between 0 and 1");
  const int k = m.slab_count();
  return k * std::log(rate) + (m.j - k) * std::log1p(-rate);
}

const ModelEvidence* EvidenceCache::find(const ModelIndicator& m) const {
  const auto it = entries_.find(m.bits);
  if (it == entries_.end() || !it->second.has_value()) return nullptr;
  return &*it->second;
}

bool EvidenceCache::known(const ModelIndicator& m) const { return entries_.count(m.bits) > 0; }

const ModelEvidence* EvidenceCache::get_or_compute(const SufficientStats& stats,
                                                   const ModelIndicator& m,
                                                   const Hyperparams& h) {
  if (known(m)) return find(m);
  try {
    insert(m, model_evidence(stats, m, h));
  } catch (const error& e) {
    insert_failure(m, e.what());
    return nullptr;
  }
  return find(m);
}

void EvidenceCache::insert(const ModelIndicator& m, ModelEvidence ev) {
  require(!known(m), errc::precondition, "model " + m.to_hex() + " was computed twice");
  entries_.emplace(m.bits, std::move(ev));
  ++computed_;
}

void EvidenceCache::insert_failure(const ModelIndicator& m, const std::string& why) {
  require(!known(m), errc::precondition, "model " + m.to_hex() + " was computed twice");
  entries_.emplace(m.bits, std::nullopt);
  ++computed_;
  log_warn("model " + m.to_hex() + ": evidence computation failed: " + why);
}

std::vector<const ModelEvidence*> EvidenceCache::successes() const {
  std::vector<const ModelEvidence*> out;
  for (const auto& [bits, entry] : entries_)
    if (entry.has_value()) out.push_back(&*entry);
  return out;
}

std::size_t EvidenceCache::failure_count() const {
  std::size_t n = 0;
  for (const auto& [bits, entry] : entries_) n += entry.has_value() ? 0 : 1;
  return n;
}

ModelIndicator greedy_search(const SufficientStats& stats, const Hyperparams& h,
                             EvidenceCache& cache, double model_prior_rate) {
  const int j = stats.j();
  ModelIndicator current = ModelIndicator::all_spike(j);
  const ModelEvidence* cur_ev = cache.get_or_compute(stats, current, h);
  require(cur_ev != nullptr, errc::optimization_failure,
          "evidence of the all-spike start model is unavailable");
  double cur_score = model_score(*cur_ev, model_prior_rate);

  for (;;) {
    // Fill this round's missing neighbor evidences in parallel slots, then
    // merge in index order: cache contents and warning order never depend on
    // scheduling.
    std::vector<int> missing;
    for (int idx = 0; idx < j; ++idx)
      if (!cache.known(current.with_flip(idx))) missing.push_back(idx);
    std::vector<ModelEvidence> computed(missing.size());
    std::vector<std::string> failure(missing.size());
    std::vector<std::uint8_t> ok(missing.size(), 0);
    parallel_for(static_cast<std::int64_t>(missing.size()), [&](std::int64_t s) {
      try {
        computed[s] = model_evidence(stats, current.with_flip(missing[s]), h);
        ok[s] = 1;
      } catch (const std::exception& e) {
        failure[s] = e.what();
      }
    });
    for (std::size_t s = 0; s < missing.size(); ++s) {
      const ModelIndicator neighbor = current.with_flip(missing[s]);
      if (ok[s]) {
        cache.insert(neighbor, std::move(computed[s]));
      } else {
        cache.insert_failure(neighbor, failure[s]);
      }
    }

    int best = -1;
    double best_score = cur_score;
    for (int idx = 0; idx < j; ++idx) {
      const ModelEvidence* ev = cache.find(current.with_flip(idx));
      if (ev == nullptr) continue;  // failed neighbor: skip (already warned)
      const double score = model_score(*ev, model_prior_rate);
      if (score > best_score) {  // strict: ties keep the lowest flip index
        best = idx;
        best_score = score;
      }
    }
    if (best < 0) return current;
    current = current.with_flip(best);
    cur_score = best_score;
  }
}

SearchTrace mc3_search(const SufficientStats& stats, ModelIndicator start, std::int64_t iters,
                       std::uint64_t seed, const Hyperparams& h, EvidenceCache& cache,
                       double model_prior_rate) {
  require(iters >= 1, errc::precondition, "the chain needs at least one iteration");
  const int j = start.j;
  require(j >= 1, errc::precondition, "the chain needs at least one indicator");

  ModelIndicator current = start;
  const ModelEvidence* cur_ev = cache.get_or_compute(stats, current, h);
  require(cur_ev != nullptr, errc::optimization_failure,
          "evidence of the chain's start model is unavailable");
  double cur_score = model_score(*cur_ev, model_prior_rate);

  SearchTrace trace;
  trace.seed = seed;
  trace.chain.reserve(static_cast<std::size_t>(iters) + 1);
  trace.chain.push_back(current);

  Rng rng(seed);
  for (std::int64_t it = 0; it < iters; ++it) {
    const int flip = static_cast<int>(rng.next_below(static_cast<std::uint64_t>(j)));
    const double u = rng.next_double();  // consumed even for certain accepts
    const ModelIndicator proposal = current.with_flip(flip);
    const ModelEvidence* ev = cache.get_or_compute(stats, proposal, h);
    if (ev != nullptr) {
      const double score = model_score(*ev, model_prior_rate);
      const double delta = score - cur_score;
      if (delta >= 0.0 || u < std::exp(delta)) {
        current = proposal;
        cur_score = score;
        ++trace.accepted_count;
      }
    }
    trace.chain.push_back(current);
  }
  return trace;
}

std::vector<ModelEvidence> occams_window_prune(const EvidenceCache& cache, double ratio,
                                               double model_prior_rate) {
  require(ratio > 1.0, errc::precondition, "the pruning ratio must exceed 1");
  const std::vector<const ModelEvidence*> all = cache.successes();
  require(!all.empty(), errc::optimization_failure, "no model evidence available to prune");

  double best = -std::numeric_limits<double>::infinity();
  for (const ModelEvidence* ev : all) best = std::max(best, model_score(*ev, model_prior_rate));
  require(std::isfinite(best), errc::optimization_failure,
          "every evaluated model has -inf evidence");

  const double cutoff = best - std::log(ratio);
  std::vector<ModelEvidence> kept;
  for (const ModelEvidence* ev : all)
    if (model_score(*ev, model_prior_rate) >= cutoff) kept.push_back(*ev);
  std::sort(kept.begin(), kept.end(), [&](const ModelEvidence& a, const ModelEvidence& b) {
    const double sa = model_score(a, model_prior_rate);
    const double sb = model_score(b, model_prior_rate);
    if (sa != sb) return sa > sb;
    return a.model.bits < b.model.bits;
  });
  return kept;
}

BmaPosterior bma_posterior(const std::vector<ModelEvidence>& pruned, const Hyperparams& h,
                           double model_prior_rate) {
  require(!pruned.empty(), errc::precondition, "model averaging needs at least one model");
  BmaPosterior bma;
  bma.hyper = h;
  bma.model_prior_rate = model_prior_rate;
  bma.j = pruned.front().model.j;

  std::vector<double> scores;
  scores.reserve(pruned.size());
  for (const ModelEvidence& ev : pruned) {
    require(ev.model.j == bma.j, errc::precondition, "mixed-J models cannot be averaged");
    scores.push_back(model_score(ev, model_prior_rate));
  }
  const double norm = log_sum_exp(scores);
  require(std::isfinite(norm), errc::numerical, "model weights do not normalize");

  for (std::size_t i = 0; i < pruned.size(); ++i) {
    BmaModel m;
    m.evidence = pruned[i];
    m.weight = std::exp(scores[i] - norm);
    std::vector<double> masses;
    for (const LaplaceComponent& c : m.evidence.components) masses.push_back(c.log_mass);
    const double total = log_sum_exp(masses);
    for (double mass : masses) m.component_weights.push_back(std::exp(mass - total));
    bma.models.push_back(std::move(m));
  }
  return bma;
}

Vec inclusion_probabilities(const BmaPosterior& bma) {
  require(!bma.models.empty(), errc::precondition, "posterior has no models");
  Vec p = Vec::Zero(bma.j);
  for (const BmaModel& m : bma.models)
    for (int jj = 0; jj < bma.j; ++jj)
      if (m.evidence.model.slab(jj)) p[jj] += m.weight;
  return p.cwiseMax(0.0).cwiseMin(1.0);
}

std::vector<PosteriorDraw> sample_posterior(const BmaPosterior& bma, std::int64_t n_samples,
                                            std::uint64_t seed) {
  require(n_samples >= 1, errc::precondition, "need at least one posterior draw");
  require(!bma.models.empty(), errc::precondition, "posterior has no models");
  const int d = ScaledParams::dim(bma.j);

  Rng rng(seed);
  std::vector<PosteriorDraw> out;
  out.reserve(static_cast<std::size_t>(n_samples));
  Vec z(d);
  for (std::int64_t s = 0; s < n_samples; ++s) {
    // Stream budget per draw: 1 model uniform, 1 component uniform, d normals.
    const double um = rng.next_double();
    const double uc = rng.next_double();
    const BmaModel& model =
        pick_weighted(bma.models, [](const BmaModel& m) { return m.weight; }, um);
    std::size_t ci = model.evidence.components.size() - 1;
    double acc = 0.0;
    for (std::size_t i = 0; i < model.component_weights.size(); ++i) {
      acc += model.component_weights[i];
      if (uc < acc) {
        ci = i;
        break;
      }
    }
    const LaplaceComponent& comp = model.evidence.components[ci];
    for (int i = 0; i < d; ++i) z[i] = rng.next_normal();
    PosteriorDraw draw;
    draw.params = ScaledParams::unpack(comp.mode.pack() + comp.sample_transform * z);
    draw.beta = unscaled_beta(draw.params);
    out.push_back(std::move(draw));
  }
  return out;
}

double median_of(std::vector<double> values) {
  require(!values.empty(), errc::precondition, "median of an empty set");
  std::sort(values.begin(), values.end());
  return values[(values.size() - 1) / 2];  // lower middle for even counts
}

double quantile_of(std::vector<double> values, double p) {
  require(!values.empty(), errc::precondition, "quantile of an empty set");
  require(p >= 0.0 && p <= 1.0, errc::precondition, "quantile level must lie in [0, 1]");
  std::sort(values.begin(), values.end());
  const double h = p * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(h);
  if (lo + 1 >= values.size()) return values.back();
  return values[lo] + (h - static_cast<double>(lo)) * (values[lo + 1] - values[lo]);
}

double point_estimate(const std::vector<PosteriorDraw>& samples) {
  std::vector<double> betas;
  betas.reserve(samples.size());
  for (const PosteriorDraw& s : samples) betas.push_back(s.beta);
  return median_of(std::move(betas));
}

std::pair<double, double> central_interval(const std::vector<PosteriorDraw>& samples,
                                           double mass) {
  require(mass > 0.0 && mass < 1.0, errc::precondition,
          "interval mass must lie strictly between 0 and 1");
  std::vector<double> betas;
  betas.reserve(samples.size());
  for (const PosteriorDraw& s : samples) betas.push_back(s.beta);
  const double tail = 0.5 * (1.0 - mass);
  return {quantile_of(betas, tail), quantile_of(betas, 1.0 - tail)};
}

void RunConfig::validate() const {
  require(mc3_iters >= 1, errc::precondition, "mc3_iters must be at least 1");
  require(occam_ratio > 1.0, errc::precondition, "occam_ratio must exceed 1");
  require(n_samples >= 1, errc::precondition, "n_samples must be at least 1");
  require(model_prior_rate > 0.0 && model_prior_rate < 1.0, errc::precondition,
          "model_prior_rate must lie strictly between 0 and 1");
  require(var_weak > 0.0, errc::precondition, "var_weak must be positive");
  if (hyper_override) {
    Hyperparams h;
    h.sd_slab = hyper_override->first;
    h.sd_spike = hyper_override->second;
    h.var_weak = var_weak;
    h.validate();
  }
}

namespace {

Hyperparams resolve_hyper(const SufficientStats& stats, const RunConfig& config) {
  if (config.hyper_override) {
    Hyperparams h;
    h.sd_slab = config.hyper_override->first;
    h.sd_spike = config.hyper_override->second;
    h.var_weak = config.var_weak;
    h.validate();
    return h;
  }
  return with_stage("hyperparameter calibration", [&] {
    return empirical_hyperparams(stats, stats.n, config.slab_factor, config.var_weak);
  });
}

RunResult assemble(const SufficientStats& stats, const RunConfig& config, const Hyperparams& h,
                   const EvidenceCache& cache, SearchTrace trace) {
  RunResult res;
  res.hyper = h;
  res.trace = std::move(trace);
  res.models_evaluated = cache.size();
  res.models_failed = cache.failure_count();
  const std::vector<ModelEvidence> pruned = with_stage("model pruning", [&] {
    return occams_window_prune(cache, config.occam_ratio, config.model_prior_rate);
  });
  res.bma = with_stage("model averaging", [&] {
    return bma_posterior(pruned, h, config.model_prior_rate);
  });
  res.inclusion = inclusion_probabilities(res.bma);
  res.samples = with_stage("posterior sampling", [&] {
    return sample_posterior(res.bma, config.n_samples, Rng::mix(config.seed, 2));
  });
  (void)stats;
  return res;
}

}  // namespace

RunResult run_massive(const SufficientStats& stats, const RunConfig& config) {
  stats.validate();
  config.validate();
  const Hyperparams h = resolve_hyper(stats, config);

  EvidenceCache cache;
  const ModelIndicator greedy = with_stage("greedy search", [&] {
    return greedy_search(stats, h, cache, config.model_prior_rate);
  });
  SearchTrace trace = with_stage("chain search", [&] {
    return mc3_search(stats, greedy, config.mc3_iters, Rng::mix(config.seed, 1), h, cache,
                      config.model_prior_rate);
  });
  return assemble(stats, config, h, cache, std::move(trace));
}

RunResult fit_single_model(const SufficientStats& stats, const ModelIndicator& m,
                           const RunConfig& config) {
  stats.validate();
  config.validate();
  require(m.j == stats.j(), errc::precondition,
          "model indicator does not match the number of candidates");
  const Hyperparams h = resolve_hyper(stats, config);

  EvidenceCache cache;
  const ModelEvidence* ev = cache.get_or_compute(stats, m, h);
  require(ev != nullptr, errc::optimization_failure,
          "evidence computation failed for the requested model");
  SearchTrace trace;
  trace.seed = config.seed;
  trace.chain.push_back(m);
  return assemble(stats, config, h, cache, std::move(trace));
}

}  // namespace massive
