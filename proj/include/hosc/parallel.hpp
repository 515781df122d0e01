#pragma once

#include <algorithm>
#include <cstdlib>
#include <functional>
#include <thread>
#include <vector>

namespace hosc {

/// Worker count: min(hardware concurrency, HOSC_THREADS if set). Always >= 1.
inline int worker_count() {
  int n = static_cast<int>(std::thread::hardware_concurrency());
  if (n < 1) n = 1;
  if (const char* cap = std::getenv("HOSC_THREADS")) {
    char* end = nullptr;
    long v = std::strtol(cap, &end, 10);
    if (end != cap && v >= 1) n = std::min<long>(n, v);
  }
  return n;
}

/// Runs fn(i) for i in [0, n). Each index owns its outputs, so results are
/// independent of the worker count. Falls back to a plain loop when only
/// one worker is available or the range is small.
inline void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn) {
  const int workers = worker_count();
  if (workers <= 1 || n < 2) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(workers);
  std::size_t chunk = (n + workers - 1) / workers;
  for (int w = 0; w < workers; ++w) {
    std::size_t lo = w * chunk;
    std::size_t hi = std::min(n, lo + chunk);
    if (lo >= hi) break;
    pool.emplace_back([lo, hi, &fn] {
      for (std::size_t i = lo; i < hi; ++i) fn(i);
    });
  }
  for (auto& t : pool) t.join();
}

}  // namespace hosc
