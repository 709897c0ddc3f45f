#include "massive/simulate.hpp"

#include <cmath>
#include <cstddef>
#include <exception>
#include <limits>
#include <utility>

#include "massive/log.hpp"
#include "massive/parallel.hpp"
#include "massive/rng.hpp"
#include "massive/search.hpp"

namespace massive {

void SimConfig::validate() const {
  require(n >= 1, errc::precondition, "need at least one row");
  require(j >= 1 && j <= ModelIndicator::max_j, errc::precondition,
          "candidate count must lie in [1, 64]");
  require(k >= 0 && k <= j, errc::precondition, "k must lie in [0, j]");
  require(std::isfinite(beta), errc::precondition, "beta must be finite");
  require(sigma > 0.0, errc::precondition, "sigma must be positive");
  require(ploidy >= 1, errc::precondition, "ploidy must be at least 1");
}

SimData simulate_dataset(const SimConfig& c) {
  c.validate();
  Rng rng(c.seed);

  Vec p(c.j);
  for (int jj = 0; jj < c.j; ++jj) p[jj] = 0.1 + 0.8 * rng.next_double();

  UnscaledParams truth;
  truth.alpha.resize(c.j);
  truth.kappa = Vec::Zero(c.j);
  for (int jj = 0; jj < c.j; ++jj) truth.alpha[jj] = 0.5 + std::abs(0.5 * rng.next_normal());
  for (int jj = 0; jj < c.k; ++jj) {
    const double mag = std::abs(0.2 * rng.next_normal());
    const double sign_draw = rng.next_double();  // consumed in both sign modes
    truth.kappa[jj] = (c.directional || sign_draw < 0.5 ? 1.0 : -1.0) * mag;
  }
  truth.beta = c.beta;
  truth.gamma_x = truth.gamma_y = c.sigma;
  truth.sd_x = truth.sd_y = c.sigma;

  SimData out;
  out.truth = truth;
  out.rows.g.resize(c.n, c.j);
  out.rows.x.resize(c.n);
  out.rows.y.resize(c.n);
  for (std::int64_t i = 0; i < c.n; ++i) {
    for (int jj = 0; jj < c.j; ++jj) {
      if (c.gaussian_g) {
        const double var = c.ploidy * p[jj] * (1.0 - p[jj]);
        out.rows.g(i, jj) = c.ploidy * p[jj] + std::sqrt(var) * rng.next_normal();
      } else {
        out.rows.g(i, jj) = static_cast<double>(rng.next_binomial(c.ploidy, p[jj]));
      }
    }
    const double u = rng.next_normal();
    const double ex = rng.next_normal();
    const double ey = rng.next_normal();
    const double x = out.rows.g.row(i).dot(truth.alpha) + c.sigma * u + c.sigma * ex;
    const double y =
        out.rows.g.row(i).dot(truth.kappa) + c.beta * x + c.sigma * u + c.sigma * ey;
    out.rows.x[i] = x;
    out.rows.y[i] = y;
  }
  return out;
}

double observational_estimate(const SufficientStats& stats) {
  stats.validate();
  const double var_x = stats.var_x();
  require(var_x > 0.0, errc::degenerate_input, "the exposure does not vary");
  return stats.cov_xy() / var_x;
}

double ivw_estimate(const Vec& r_x, const Vec& r_y, const Vec& se_y) {
  const auto j = r_x.size();
  require(j >= 1 && r_y.size() == j && se_y.size() == j, errc::precondition,
          "ratio inputs must be equal-length and nonempty");
  require((se_y.array() > 0.0).all(), errc::precondition,
          "outcome standard errors must be positive");

  double num = 0.0, den = 0.0;
  for (Eigen::Index jj = 0; jj < j; ++jj) {
    if (r_x[jj] == 0.0) {
      log_warn("candidate " + std::to_string(jj + 1) +
               " has zero instrument strength; excluded from the weighted mean");
      continue;
    }
    const double w = r_x[jj] * r_x[jj] / (se_y[jj] * se_y[jj]);
    num += w * (r_y[jj] / r_x[jj]);
    den += w;
  }
  require(den > 0.0, errc::degenerate_input, "no usable instrument");
  return num / den;
}

std::map<std::string, Estimator> default_estimators() {
  std::map<std::string, Estimator> out;
  out["massive"] = [](const BenchContext& ctx) {
    RunConfig rc;
    rc.seed = Rng::mix(ctx.rep_seed, 11);
    return point_estimate(run_massive(ctx.stats, rc).samples);
  };
  out["gaussian"] = [](const BenchContext& ctx) {
    RunConfig rc;
    rc.seed = Rng::mix(ctx.rep_seed, 12);
    const ModelIndicator all = ModelIndicator::all_slab(ctx.stats.j());
    return point_estimate(fit_single_model(ctx.stats, all, rc).samples);
  };
  out["oracle"] = [](const BenchContext& ctx) {
    RunConfig rc;
    rc.seed = Rng::mix(ctx.rep_seed, 13);
    ModelIndicator m = ModelIndicator::all_spike(ctx.stats.j());
    for (int jj = 0; jj < ctx.truth.j(); ++jj)
      if (ctx.truth.kappa[jj] != 0.0) m = m.with_flip(jj);
    return point_estimate(fit_single_model(ctx.stats, m, rc).samples);
  };
  out["ivw"] = [](const BenchContext& ctx) {
    const SummaryInput s = summaries_from_stats(ctx.stats, ctx.config.ploidy);
    Vec rx(s.j()), ry(s.j()), se(s.j());
    for (int jj = 0; jj < s.j(); ++jj) {
      rx[jj] = s.records[jj].beta_x;
      ry[jj] = s.records[jj].beta_y;
      se[jj] = s.records[jj].se_y;
    }
    return ivw_estimate(rx, ry, se);
  };
  out["observational"] = [](const BenchContext& ctx) {
    return observational_estimate(ctx.stats);
  };
  out["truth"] = [](const BenchContext& ctx) { return ctx.truth.beta; };
  return out;
}

std::vector<BenchRow> rmse_benchmark(const std::vector<SimConfig>& configs, int reps,
                                     const std::map<std::string, Estimator>& estimators,
                                     std::uint64_t master_seed) {
  require(!configs.empty(), errc::precondition, "need at least one configuration");
  require(reps >= 2, errc::precondition, "need at least two replicates");
  require(!estimators.empty(), errc::precondition, "need at least one estimator");
  for (const SimConfig& c : configs) c.validate();

  constexpr double nan = std::numeric_limits<double>::quiet_NaN();
  std::vector<BenchRow> out;
  for (std::size_t ci = 0; ci < configs.size(); ++ci) {
    log_info("benchmark config " + std::to_string(ci + 1) + "/" +
             std::to_string(configs.size()) + ": n=" + std::to_string(configs[ci].n) +
             " j=" + std::to_string(configs[ci].j) + " k=" + std::to_string(configs[ci].k));

    // estimates[e][r]: per-slot storage keeps parallel replicates race-free
    // and the outcome schedule-independent. NaN marks a failure.
    const std::size_t ne = estimators.size();
    std::vector<std::vector<double>> estimates(ne, std::vector<double>(reps, nan));
    parallel_for(reps, [&](std::int64_t r) {
      SimConfig cfg = configs[ci];
      cfg.seed = Rng::mix(master_seed, static_cast<std::uint64_t>(ci) * 100003ull +
                                           static_cast<std::uint64_t>(r));
      SimData data;
      SufficientStats stats;
      try {
        data = simulate_dataset(cfg);
        stats = moments_from_rows(data.rows);
      } catch (const std::exception& e) {
        log_warn("replicate " + std::to_string(r + 1) + " unusable: " + e.what());
        return;  // every estimator records a failure for this replicate
      }
      const BenchContext ctx{cfg, data.rows, stats, data.truth, cfg.seed};
      std::size_t e = 0;
      for (const auto& [name, estimator] : estimators) {
        try {
          estimates[e][r] = estimator(ctx);
        } catch (const std::exception& ex) {
          log_warn(name + " failed on replicate " + std::to_string(r + 1) + ": " + ex.what());
        }
        ++e;
      }
    });

    std::size_t e = 0;
    for (const auto& [name, estimator] : estimators) {
      BenchRow row;
      row.config = configs[ci];
      row.estimator = name;
      row.reps = reps;
      std::vector<double> sq;
      for (int r = 0; r < reps; ++r) {
        if (std::isnan(estimates[e][r])) {
          ++row.failures;
          continue;
        }
        const double err = estimates[e][r] - configs[ci].beta;
        sq.push_back(err * err);
      }
      if (sq.empty()) {
        row.rmse = row.ci_low = row.ci_high = nan;
      } else {
        double mean_sq = 0.0;
        for (double v : sq) mean_sq += v;
        mean_sq /= static_cast<double>(sq.size());
        row.rmse = std::sqrt(mean_sq);

        Rng boot(Rng::mix(master_seed, 0xB0070000ull +
                                           static_cast<std::uint64_t>(ci) * 4096ull + e));
        std::vector<double> resampled(1000);
        for (double& b : resampled) {
          double acc = 0.0;
          for (std::size_t i = 0; i < sq.size(); ++i)
            acc += sq[boot.next_below(sq.size())];
          b = std::sqrt(acc / static_cast<double>(sq.size()));
        }
        row.ci_low = quantile_of(resampled, 0.025);
        row.ci_high = quantile_of(std::move(resampled), 0.975);
      }
      out.push_back(std::move(row));
      ++e;
    }
  }
  return out;
}

std::string benchmark_csv(const std::vector<BenchRow>& rows) {
  const auto cell = [](double v) { return std::isnan(v) ? std::string() : csv_double(v); };
  std::string out = "n,j,k,valid,beta,sigma,estimator,rmse,ci_low,ci_high,failures\n";
  for (const BenchRow& r : rows) {
    out += std::to_string(r.config.n) + "," + std::to_string(r.config.j) + "," +
           std::to_string(r.config.k) + "," + std::to_string(r.config.j - r.config.k) + "," +
           csv_double(r.config.beta) + "," + csv_double(r.config.sigma) + "," + r.estimator +
           "," + cell(r.rmse) + "," + cell(r.ci_low) + "," + cell(r.ci_high) + "," +
           std::to_string(r.failures) + "\n";
  }
  return out;
}

}  // namespace massive
