#pragma once

#include <cstddef>
#include <functional>
#include <thread>
#include <vector>

namespace wscd {

// Runs fn(0..n-1) across up to max_threads workers (0 = hardware default).
// Each index is handled exactly once; callers keep determinism by writing
// to per-index slots and reducing in index order afterwards.
inline void parallel_for(std::size_t n, int max_threads,
                         const std::function<void(std::size_t)>& fn) {
  std::size_t threads = max_threads > 0 ? static_cast<std::size_t>(max_threads)
                                        : std::thread::hardware_concurrency();
  if (threads == 0) threads = 1;
  threads = std::min(threads, n);
  if (threads <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(threads);
  for (std::size_t t = 0; t < threads; ++t) {
    pool.emplace_back([t, threads, n, &fn]() {
      for (std::size_t i = t; i < n; i += threads) fn(i);
    });
  }
  for (auto& th : pool) th.join();
}

}  // namespace wscd
