#pragma once

#include "crossfit/types.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace crossfit {

// Degree of column parallelism. Defaults to CROSSFIT_THREADS when set,
// otherwise std::thread::hardware_concurrency().
int num_threads();
void set_num_threads(int n);

// Runs body(k) for k in [0, n). Each k must touch disjoint output, so the
// result does not depend on the thread count.
template <typename Body>
void parallel_for(Index n, Body&& body) {
  const int workers = static_cast<int>(std::min<Index>(num_threads(), n));
  if (workers <= 1) {
    for (Index k = 0; k < n; ++k) body(k);
    return;
  }
  std::atomic<Index> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  {
    std::vector<std::jthread> pool;
    pool.reserve(workers);
    for (int t = 0; t < workers; ++t) {
      pool.emplace_back([&] {
        for (Index k = next++; k < n; k = next++) {
          try {
            body(k);
          } catch (...) {
            std::lock_guard lock(failure_mutex);
            if (!failure) failure = std::current_exception();
          }
        }
      });
    }
  }
  if (failure) std::rethrow_exception(failure);
}

}  // namespace crossfit
