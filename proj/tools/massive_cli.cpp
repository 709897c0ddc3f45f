// massive: spike-and-slab instrumental-variable estimation from the command
// line. Subcommands: simulate (synthetic datasets), fit (full model-averaged
// posterior), profile (confounder-space posterior grid), benchmark (replicated
// RMSE comparison). All outputs are machine-readable (JSON/CSV), written
// atomically, and byte-identical for a fixed seed regardless of --threads.

#include <cmath>
#include <cstdint>
#include <exception>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "massive/ingest.hpp"
#include "massive/log.hpp"
#include "massive/parallel.hpp"
#include "massive/posterior.hpp"
#include "massive/search.hpp"
#include "massive/simulate.hpp"
#include "massive/types.hpp"

namespace {

using json = nlohmann::ordered_json;
using namespace massive;

constexpr const char* version = "0.1.0";

// Exit codes: 0 success, 1 usage, 2 bad input, 3 numerical failure.
int exit_code_for(errc kind) {
  switch (kind) {
    case errc::parse:
    case errc::degenerate_input:
    case errc::inconsistent_input:
    case errc::precondition:
      return 2;
    default:
      return 3;
  }
}

// Shared input options: individual-level rows or GWAS-style summaries.
struct InputOpts {
  std::string rows_path;
  std::string summary_path;
  int ploidy = 2;
  double beta_obs = 0.0;
  std::int64_t n_obs = -1;  // -1 = not given
  bool intercept = false;

  void attach(CLI::App* cmd) {
    auto* rows = cmd->add_option("--input", rows_path,
                                 "individual-level CSV (header G1,...,GJ,X,Y)");
    auto* summ = cmd->add_option(
        "--summary", summary_path,
        "summary CSV (header snp,eaf,beta_x,se_x,n_x,beta_y,se_y,n_y)");
    rows->excludes(summ);
    summ->excludes(rows);
    cmd->add_option("--ploidy", ploidy, "allele copies per variant (summary input)")
        ->default_val(2);
    auto* bobs = cmd->add_option("--beta-obs", beta_obs,
                                 "observational Y-on-X regression coefficient (summary input)");
    bobs->needs(summ);
    cmd->add_option("--n-obs", n_obs, "sample size behind --beta-obs")->needs(summ);
    cmd->add_flag("--intercept", intercept,
                  "append a constant candidate column (rows input)")
        ->excludes(summ);
    summary_needed_ = bobs;
  }

  // CLI11 can't express "--summary requires --beta-obs" as a needs() on the
  // other option's presence, so it is checked here.
  void validate_usage() const {
    if (!summary_path.empty() && summary_needed_->count() == 0)
      throw CLI::RequiredError("--beta-obs (required with --summary)");
    if (rows_path.empty() && summary_path.empty())
      throw CLI::RequiredError("--input or --summary");
  }

  SufficientStats load(json* echo) const {
    validate_usage();
    SufficientStats stats;
    if (!rows_path.empty()) {
      const DataRows rows = read_rows_csv(rows_path);
      stats = moments_from_rows(rows, intercept);
      if (echo)
        *echo = {{"path", rows_path},
                 {"kind", "rows"},
                 {"intercept", intercept},
                 {"n", stats.n},
                 {"j", stats.j()}};
    } else {
      SummaryInput in;
      in.records = read_summary_csv(summary_path);
      in.ploidy = ploidy;
      in.beta_obs = beta_obs;
      if (n_obs >= 0) in.n_obs = n_obs;
      stats = stats_from_summary(in);
      if (echo) {
        *echo = {{"path", summary_path},
                 {"kind", "summary"},
                 {"ploidy", ploidy},
                 {"beta_obs", beta_obs},
                 {"n", stats.n},
                 {"j", stats.j()}};
        if (n_obs >= 0) (*echo)["n_obs"] = n_obs;
      }
    }
    return stats;
  }

 private:
  CLI::Option* summary_needed_ = nullptr;
};

json components_json(const ModelEvidence& ev) {
  json out = json::array();
  for (const auto& c : ev.components) {
    out.push_back({{"gamma_x_t", c.mode.gamma_x_t},
                   {"gamma_y_t", c.mode.gamma_y_t},
                   {"beta", unscaled_beta(c.mode)},
                   {"log_posterior", c.log_post_at_mode},
                   {"log_det_hessian", c.log_det_hessian},
                   {"log_mass", c.log_mass},
                   {"floored_eigenvalues", c.floored}});
  }
  return out;
}

int cmd_simulate(const SimConfig& sim, const std::string& out_prefix) {
  const SimData data = simulate_dataset(sim);
  write_rows_csv(out_prefix + ".csv", data.rows);

  json truth = {
      {"version", version},
      {"command", "simulate"},
      {"config",
       {{"n", sim.n},
        {"j", sim.j},
        {"k", sim.k},
        {"beta", sim.beta},
        {"sigma", sim.sigma},
        {"ploidy", sim.ploidy},
        {"seed", sim.seed},
        {"directional", sim.directional},
        {"gaussian_g", sim.gaussian_g}}},
      {"params",
       {{"alpha", std::vector<double>(data.truth.alpha.begin(), data.truth.alpha.end())},
        {"kappa", std::vector<double>(data.truth.kappa.begin(), data.truth.kappa.end())},
        {"beta", data.truth.beta},
        {"gamma_x", data.truth.gamma_x},
        {"gamma_y", data.truth.gamma_y},
        {"sd_x", data.truth.sd_x},
        {"sd_y", data.truth.sd_y}}},
  };
  write_text_atomic(out_prefix + "_truth.json", truth.dump(2) + "\n");
  log_info("wrote " + out_prefix + ".csv and " + out_prefix + "_truth.json");
  return 0;
}

int cmd_fit(const InputOpts& input, const RunConfig& config, const std::string& out_path,
            const std::string& samples_out) {
  json input_echo;
  const SufficientStats stats = input.load(&input_echo);
  const RunResult res = run_massive(stats, config);

  json models = json::array();
  for (const auto& bm : res.bma.models) {
    models.push_back({{"indicator", bm.evidence.model.to_hex()},
                      {"slab_count", bm.evidence.model.slab_count()},
                      {"log_evidence", bm.evidence.log_evidence},
                      {"weight", bm.weight},
                      {"components", components_json(bm.evidence)}});
  }
  const auto [lo, hi] = central_interval(res.samples, 0.9);

  json out = {
      {"version", version},
      {"command", "fit"},
      {"input", input_echo},
      {"config",
       {{"seed", config.seed},
        {"mc3_iters", config.mc3_iters},
        {"occam_ratio", config.occam_ratio},
        {"n_samples", config.n_samples},
        {"model_prior_rate", config.model_prior_rate},
        {"slab_factor",
         config.slab_factor == SlabFactorMode::literal_101 ? "literal_101" : "one_plus_var_weak"},
        {"var_weak", config.var_weak}}},
      {"hyperparams",
       {{"sd_slab", res.hyper.sd_slab},
        {"sd_spike", res.hyper.sd_spike},
        {"var_weak", res.hyper.var_weak},
        {"source", config.hyper_override ? "override" : "empirical"}}},
      {"search",
       {{"models_evaluated", res.models_evaluated},
        {"models_failed", res.models_failed},
        {"models_kept", res.bma.models.size()},
        {"mc3_iterations", res.trace.chain.empty() ? 0 : res.trace.chain.size() - 1},
        {"mc3_accepted", res.trace.accepted_count}}},
      {"models", models},
      {"inclusion_probabilities",
       std::vector<double>(res.inclusion.begin(), res.inclusion.end())},
      {"beta",
       {{"median", point_estimate(res.samples)},
        {"ci90_low", lo},
        {"ci90_high", hi},
        {"n_samples", res.samples.size()}}},
  };
  write_text_atomic(out_path, out.dump(2) + "\n");
  log_info("wrote " + out_path);

  if (!samples_out.empty()) {
    std::string csv = "beta\n";
    for (const auto& d : res.samples) csv += csv_double(d.beta) + "\n";
    write_text_atomic(samples_out, csv);
    log_info("wrote " + samples_out);
  }
  return 0;
}

int cmd_profile(const InputOpts& input, const std::string& model_str, double gx_min,
                double gx_max, double gy_min, double gy_max, int steps,
                const std::string& out_path) {
  const SufficientStats stats = input.load(nullptr);
  const int j = stats.j();

  ModelIndicator m;
  if (model_str.empty()) {
    m = ModelIndicator::all_slab(j);
  } else {
    std::size_t used = 0;
    std::uint64_t bits = 0;
    try {
      bits = std::stoull(model_str, &used, 0);  // base 0: accepts 0x… and decimal
    } catch (const std::exception&) {
      fail(errc::parse, "cannot parse model bitmask '" + model_str + "'");
    }
    require(used == model_str.size(), errc::parse,
            "cannot parse model bitmask '" + model_str + "'");
    require(j >= ModelIndicator::max_j || bits < (1ull << j), errc::precondition,
            "model bitmask has indicators beyond the candidate count");
    m = ModelIndicator{bits, j};
  }

  std::vector<std::pair<double, double>> cells;
  cells.reserve(static_cast<std::size_t>(steps) * steps);
  for (int ix = 0; ix < steps; ++ix)
    for (int iy = 0; iy < steps; ++iy) {
      const double fx = steps == 1 ? 0.5 : static_cast<double>(ix) / (steps - 1);
      const double fy = steps == 1 ? 0.5 : static_cast<double>(iy) / (steps - 1);
      cells.emplace_back(gx_min + fx * (gx_max - gx_min), gy_min + fy * (gy_max - gy_min));
    }

  const Hyperparams h = empirical_hyperparams(stats, stats.n);
  const std::vector<double> values = profile_posterior_grid(stats, m, h, cells);

  std::string csv = "gamma_x,gamma_y,log_posterior\n";
  for (std::size_t i = 0; i < cells.size(); ++i) {
    csv += csv_double(cells[i].first) + "," + csv_double(cells[i].second) + ",";
    if (std::isfinite(values[i])) csv += csv_double(values[i]);  // failed cells stay empty
    csv += "\n";
  }
  write_text_atomic(out_path, csv);
  log_info("wrote " + out_path);
  return 0;
}

int cmd_benchmark(const std::string& config_path, const std::string& out_path) {
  std::ifstream in(config_path, std::ios::binary);
  require(in.good(), errc::parse, "cannot open " + config_path);
  json cfg;
  try {
    cfg = json::parse(in);
  } catch (const json::parse_error& e) {
    fail(errc::parse, config_path + ": " + e.what());
  }

  std::vector<SimConfig> sims;
  try {
    const std::uint64_t master_seed = cfg.value("seed", 0ull);
    const int reps = cfg.value("reps", 20);
    for (const auto& c : cfg.at("configs")) {
      SimConfig s;
      s.n = c.value("n", s.n);
      s.j = c.value("j", s.j);
      s.k = c.value("k", s.k);
      s.beta = c.value("beta", s.beta);
      s.sigma = c.value("sigma", s.sigma);
      s.ploidy = c.value("ploidy", s.ploidy);
      s.directional = c.value("directional", s.directional);
      s.gaussian_g = c.value("gaussian_g", s.gaussian_g);
      sims.push_back(s);
    }
    const auto all = default_estimators();
    std::map<std::string, Estimator> chosen;
    if (cfg.contains("estimators")) {
      for (const auto& name : cfg.at("estimators")) {
        const auto it = all.find(name.get<std::string>());
        require(it != all.end(), errc::parse,
                "unknown estimator '" + name.get<std::string>() + "'");
        chosen.insert(*it);
      }
    } else {
      chosen = all;
    }
    const std::vector<BenchRow> rows = rmse_benchmark(sims, reps, chosen, master_seed);
    write_text_atomic(out_path, benchmark_csv(rows));
  } catch (const json::exception& e) {
    fail(errc::parse, config_path + ": " + e.what());
  }
  log_info("wrote " + out_path);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Bayesian model averaging over spike-and-slab instrumental-variable models"};
  app.require_subcommand(1);
  app.fallthrough();  // global flags (--threads, --quiet, ...) after the subcommand
  app.set_version_flag("--version", version);

  int threads = 0;
  bool verbose = false;
  bool quiet = false;
  app.add_option("--threads", threads, "worker thread bound (0 = all cores)")
      ->default_val(0);
  app.add_flag("--verbose", verbose, "log progress to stderr");
  app.add_flag("--quiet", quiet, "suppress warnings");

  // simulate
  auto* sim_cmd = app.add_subcommand("simulate", "write a synthetic dataset + truth JSON");
  SimConfig sim;
  std::string sim_out = "sim";
  sim_cmd->add_option("--n", sim.n, "rows")->default_val(sim.n);
  sim_cmd->add_option("--j", sim.j, "candidate instruments")->default_val(sim.j);
  sim_cmd->add_option("--k", sim.k, "candidates with nonzero pleiotropic effect")
      ->default_val(sim.k);
  sim_cmd->add_option("--beta", sim.beta, "true causal effect")->default_val(sim.beta);
  sim_cmd->add_option("--sigma", sim.sigma, "confounding/noise scale")->default_val(sim.sigma);
  sim_cmd->add_option("--ploidy", sim.ploidy, "allele copies per variant")
      ->default_val(sim.ploidy);
  sim_cmd->add_option("--seed", sim.seed, "RNG seed")->default_val(sim.seed);
  sim_cmd->add_flag("--directional", sim.directional, "all pleiotropic effects positive");
  sim_cmd->add_flag("--gaussian-g", sim.gaussian_g, "continuous moment-matched variants");
  sim_cmd->add_option("--out", sim_out, "output prefix (<out>.csv, <out>_truth.json)")
      ->default_val(sim_out);

  // fit
  auto* fit_cmd = app.add_subcommand("fit", "model-averaged causal-effect posterior");
  InputOpts fit_in;
  fit_in.attach(fit_cmd);
  RunConfig run;
  double sd_slab = 0.0, sd_spike = 0.0;
  std::string fit_out = "fit.json", samples_out;
  fit_cmd->add_option("--seed", run.seed, "RNG seed")->default_val(run.seed);
  fit_cmd->add_option("--mc3-iters", run.mc3_iters, "MC3 chain length")
      ->default_val(run.mc3_iters);
  fit_cmd->add_option("--occam-ratio", run.occam_ratio, "Occam's window ratio")
      ->default_val(run.occam_ratio);
  fit_cmd->add_option("--samples", run.n_samples, "posterior draws")
      ->default_val(run.n_samples);
  auto* slab_opt = fit_cmd->add_option("--sd-slab", sd_slab, "slab scale (with --sd-spike)");
  auto* spike_opt =
      fit_cmd->add_option("--sd-spike", sd_spike, "spike scale (with --sd-slab)");
  slab_opt->needs(spike_opt);
  spike_opt->needs(slab_opt);
  fit_cmd->add_option("--model-prior-rate", run.model_prior_rate,
                      "per-indicator Bernoulli prior rate")
      ->default_val(run.model_prior_rate);
  fit_cmd->add_option("--out", fit_out, "result JSON path")->default_val(fit_out);
  fit_cmd->add_option("--samples-out", samples_out, "also write causal-effect draws CSV");

  // profile
  auto* prof_cmd = app.add_subcommand("profile", "confounder-space posterior grid CSV");
  InputOpts prof_in;
  prof_in.attach(prof_cmd);
  std::string model_str;
  double gx_min = -3.0, gx_max = 3.0, gy_min = -3.0, gy_max = 3.0;
  int steps = 25;
  std::string prof_out = "profile.csv";
  prof_cmd->add_option("--model", model_str, "indicator bitmask (hex or decimal; default all-slab)");
  prof_cmd->add_option("--gx-min", gx_min)->default_val(gx_min);
  prof_cmd->add_option("--gx-max", gx_max)->default_val(gx_max);
  prof_cmd->add_option("--gy-min", gy_min)->default_val(gy_min);
  prof_cmd->add_option("--gy-max", gy_max)->default_val(gy_max);
  prof_cmd->add_option("--steps", steps, "grid resolution per axis")
      ->default_val(steps)
      ->check(CLI::PositiveNumber);
  prof_cmd->add_option("--out", prof_out, "grid CSV path")->default_val(prof_out);

  // benchmark
  auto* bench_cmd = app.add_subcommand("benchmark", "replicated RMSE comparison CSV");
  std::string bench_cfg, bench_out = "benchmark.csv";
  bench_cmd->add_option("--config", bench_cfg, "JSON config (configs, reps, estimators, seed)")
      ->required();
  bench_cmd->add_option("--out", bench_out, "RMSE CSV path")->default_val(bench_out);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;  // --help/--version exit 0, usage errors exit 1
  }

  set_num_threads(threads);
  if (quiet)
    set_log_level(log_level::silent);
  else if (verbose)
    set_log_level(log_level::info);

  try {
    if (sim_cmd->parsed()) return cmd_simulate(sim, sim_out);
    if (fit_cmd->parsed()) {
      if (slab_opt->count()) run.hyper_override = {sd_slab, sd_spike};
      return cmd_fit(fit_in, run, fit_out, samples_out);
    }
    if (prof_cmd->parsed())
      return cmd_profile(prof_in, model_str, gx_min, gx_max, gy_min, gy_max, steps, prof_out);
    if (bench_cmd->parsed()) return cmd_benchmark(bench_cfg, bench_out);
  } catch (const CLI::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code_for(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
  return 1;
}
