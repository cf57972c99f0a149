#pragma once

#include <algorithm>
#include <cstdlib>
#include <functional>
#include <mutex>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace gmp {

/// Resolves a worker count: explicit request > GMP_THREADS env > hardware.
inline int resolve_thread_count(int requested = 0) {
  if (requested > 0) return requested;
  if (const char* env = std::getenv("GMP_THREADS")) {
    int n = std::atoi(env);
    if (n > 0) return n;
  }
  unsigned hw = std::thread::hardware_concurrency();
  return hw > 0 ? static_cast<int>(hw) : 1;
}

/// Runs fn(i) for i in [begin, end) on up to `threads` workers.
///
/// Indices are split into contiguous blocks assigned by worker rank, so the
/// partitioning is a pure function of (range, thread count). Each index must
/// write only its own outputs; results are then independent of the schedule.
inline void parallel_for(int begin, int end, int threads,
                         const std::function<void(int)>& fn) {
  const int n = end - begin;
  if (n <= 0) return;
  threads = std::max(1, std::min(threads, n));
  if (threads == 1) {
    for (int i = begin; i < end; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(threads);
  std::exception_ptr first_error;
  std::mutex error_mutex;
  const int chunk = (n + threads - 1) / threads;
  for (int t = 0; t < threads; ++t) {
    const int lo = begin + t * chunk;
    const int hi = std::min(end, lo + chunk);
    if (lo >= hi) break;
    pool.emplace_back([&, lo, hi]() {
      try {
        for (int i = lo; i < hi; ++i) fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> g(error_mutex);
        if (!first_error) first_error = std::current_exception();
      }
    });
  }
  for (auto& th : pool) th.join();
  if (first_error) std::rethrow_exception(first_error);
}

}  // namespace gmp
