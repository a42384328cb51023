#pragma once

#include <cstdlib>
#include <functional>
#include <thread>
#include <vector>

namespace opfactor {

/// Resolves a worker count: explicit request > 0 wins, otherwise the
/// OPFACTOR_THREADS environment variable, otherwise 1 (the determinism
/// reference).
inline int resolve_threads(int requested) {
  if (requested > 0) return requested;
  if (const char* env = std::getenv("OPFACTOR_THREADS")) {
    const int n = std::atoi(env);
    if (n > 0) return n;
  }
  return 1;
}

/// Runs fn(i) for i in [0, n). With threads <= 1 the loop is a plain serial
/// loop; otherwise work is split into contiguous static chunks. Callers must
/// only write to disjoint slots, so results do not depend on the schedule.
inline void parallel_for(long n, int threads, const std::function<void(long)>& fn) {
  if (threads <= 1 || n <= 1) {
    for (long i = 0; i < n; ++i) fn(i);
    return;
  }
  const int workers = static_cast<int>(std::min<long>(threads, n));
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&, w]() {
      const long lo = n * w / workers;
      const long hi = n * (w + 1) / workers;
      for (long i = lo; i < hi; ++i) fn(i);
    });
  }
  for (auto& t : pool) t.join();
}

}  // namespace opfactor
