#pragma once

#include <cstdint>
#include <cstdlib>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace dualx {

// Worker count: min(omp_get_max_threads(), DUALX_THREADS). Read once.
inline int max_threads() {
  static const int cached = [] {
#ifdef _OPENMP
    int n = omp_get_max_threads();
#else
    int n = 1;
#endif
    if (const char* env = std::getenv("DUALX_THREADS")) {
      int cap = std::atoi(env);
      if (cap >= 1 && cap < n) n = cap;
    }
    return n;
  }();
  return cached;
}

// Static partition of [0, n). Every index runs exactly once and each
// iteration owns its outputs, so results are bit-identical to the serial
// loop at any thread count.
template <class F>
void parallel_for(std::int64_t n, F&& f, std::int64_t grain = 256) {
#ifdef _OPENMP
  if (n >= grain && max_threads() > 1) {
#pragma omp parallel for schedule(static) num_threads(dualx::max_threads())
    for (std::int64_t i = 0; i < n; ++i) f(i);
    return;
  }
#else
  (void)grain;
#endif
  for (std::int64_t i = 0; i < n; ++i) f(i);
}

}  // namespace dualx
