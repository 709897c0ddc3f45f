#pragma once

#include <cstdint>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace massive {

// Global worker-thread bound. 0 means "use all hardware threads". Set once at
// startup (CLI --threads); not intended for concurrent mutation.
void set_num_threads(int threads);
int num_threads();
int hardware_threads();

// Runs fn(i) for i in [0, n). Results must be written to per-index slots so
// the outcome is independent of scheduling; reductions are done by the caller
// in index order afterwards. This is what keeps every code path bit-identical
// for any thread count. fn must not let exceptions escape (throwing out of an
// OpenMP region is undefined); callers record per-slot failures instead.
template <class F>
void parallel_for(std::int64_t n, F&& fn) {
#ifdef _OPENMP
  const int threads = num_threads();
  if (threads > 1 && n > 1) {
#pragma omp parallel for schedule(dynamic, 1) num_threads(threads)
    for (std::int64_t i = 0; i < n; ++i) fn(i);
    return;
  }
#endif
  for (std::int64_t i = 0; i < n; ++i) fn(i);
}

}  // namespace massive
