#pragma once

#include "fracstein/types.hpp"

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

namespace fracstein {

// Worker count: FRAC_STEIN_THREADS if set (>= 1), else the hardware count.
inline int default_workers() {
  if (const char* env = std::getenv("FRAC_STEIN_THREADS")) {
    try {
      const int n = std::stoi(env);
      if (n >= 1) return n;
    } catch (const std::exception&) {
    }
  }
  return static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
}

// Calls body(begin, end) for consecutive blocks of [0, count). Block
// boundaries depend only on `block`, never on the worker count, so any body
// that writes results into slots indexed by position is reproducible. The
// first exception thrown by a body is rethrown on the calling thread.
template <class Body>
void for_each_block(Index count, Index block, Body&& body, int workers = 0) {
  if (count <= 0) return;
  block = std::max<Index>(block, 1);
  const Index blocks = (count + block - 1) / block;
  if (workers <= 0) workers = default_workers();
  workers = static_cast<int>(std::min<Index>(workers, blocks));

  std::atomic<Index> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  const auto run = [&] {
    for (;;) {
      const Index b = next.fetch_add(1);
      if (b >= blocks) return;
      try {
        body(b * block, std::min(count, (b + 1) * block));
      } catch (...) {
        std::lock_guard<std::mutex> lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        next.store(blocks);
      }
    }
  };
  if (workers == 1) {
    run();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(workers - 1);
    for (int w = 1; w < workers; ++w) pool.emplace_back(run);
    run();
    for (auto& t : pool) t.join();
  }
  if (failure) std::rethrow_exception(failure);
}

}  // namespace fracstein
