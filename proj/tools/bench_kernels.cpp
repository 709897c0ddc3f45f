// Timing harness for the OpenMP kernels against their serial reference
// implementations: finite-difference Hessian columns, profile-grid cells, and
// chunked moment accumulation. Each pair must agree bit-for-bit (the parallel
// versions write per-slot results and merge in a fixed order); this binary
// reports the speedup actually realized on the current machine.
//
//   bench_kernels [threads]   (default: all hardware threads)

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <utility>
#include <vector>

#include "massive/ingest.hpp"
#include "massive/log.hpp"
#include "massive/ml_manifold.hpp"
#include "massive/optimize.hpp"
#include "massive/parallel.hpp"
#include "massive/posterior.hpp"
#include "massive/simulate.hpp"

using namespace massive;
using clock_type = std::chrono::steady_clock;

namespace {

template <class F>
double time_best_of(int reps, const F& f) {
  double best = 1e300;
  for (int r = 0; r < reps; ++r) {
    const auto t0 = clock_type::now();
    f();
    const auto t1 = clock_type::now();
    best = std::min(best, std::chrono::duration<double>(t1 - t0).count());
  }
  return best;
}

void report(const char* name, double serial_s, double parallel_s, bool identical) {
  std::printf("%-18s serial %9.4f ms   parallel %9.4f ms   speedup %5.2fx   %s\n", name,
              serial_s * 1e3, parallel_s * 1e3, serial_s / parallel_s,
              identical ? "bit-identical" : "MISMATCH");
}

}  // namespace

int main(int argc, char** argv) {
  const int threads = argc > 1 ? std::atoi(argv[1]) : 0;
  set_num_threads(threads);
  set_log_level(log_level::silent);
  std::printf("threads: %d (hardware %d)\n", num_threads(), hardware_threads());

  SimConfig sc;
  sc.n = 200000;
  sc.j = 40;
  sc.k = 8;
  sc.beta = 0.3;
  sc.sigma = 2.0;
  sc.seed = 7;
  const SimData sim = simulate_dataset(sc);
  const SufficientStats stats = moments_from_rows(sim.rows);
  const Hyperparams hyper = empirical_hyperparams(stats, stats.n);
  const ModelIndicator model = ModelIndicator::all_slab(sc.j);

  // moments: 200k rows in 4096-row chunks
  {
    SufficientStats a, b;
    const double ts = time_best_of(3, [&] { a = moments_from_rows_serial(sim.rows); });
    const double tp = time_best_of(3, [&] { b = moments_from_rows(sim.rows); });
    const bool same = a.m_gg == b.m_gg && a.m_gx == b.m_gx && a.m_gy == b.m_gy &&
                      a.m_xx == b.m_xx && a.m_yy == b.m_yy && a.m_xy == b.m_xy &&
                      a.mean_g == b.mean_g && a.mean_x == b.mean_x && a.mean_y == b.mean_y;
    report("moments", ts, tp, same);
  }

  // Hessian: 2J+5 = 85 finite-difference columns of the posterior gradient
  {
    const auto grad = [&](const Vec& v) {
      return grad_log_posterior(stats, ScaledParams::unpack(v), model, hyper);
    };
    const Vec x0 = ml_given_confounding(stats, 0.4, -0.3).pack();
    Mat a, b;
    const double ts = time_best_of(5, [&] { a = hessian_from_gradient_serial(grad, x0); });
    const double tp = time_best_of(5, [&] { b = hessian_from_gradient(grad, x0); });
    report("hessian", ts, tp, a == b);
  }

  // profile grid: 15x15 per-cell restricted maximizations
  {
    std::vector<std::pair<double, double>> cells;
    for (int ix = 0; ix < 15; ++ix)
      for (int iy = 0; iy < 15; ++iy)
        cells.emplace_back(-2.0 + 4.0 * ix / 14.0, -2.0 + 4.0 * iy / 14.0);
    std::vector<double> a, b;
    const double ts =
        time_best_of(2, [&] { a = profile_posterior_grid_serial(stats, model, hyper, cells); });
    const double tp =
        time_best_of(2, [&] { b = profile_posterior_grid(stats, model, hyper, cells); });
    bool same = a.size() == b.size();
    for (std::size_t i = 0; same && i < a.size(); ++i)
      same = a[i] == b[i] || (std::isnan(a[i]) && std::isnan(b[i]));
    report("profile_grid", ts, tp, same);
  }

  return 0;
}
