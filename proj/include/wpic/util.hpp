#pragma once

#include <atomic>
#include <cstdlib>
#include <functional>
#include <string>
#include <thread>
#include <vector>

namespace wpic {

// Worker count: WPIC_THREADS if set, otherwise hardware concurrency.
inline int default_thread_count() {
  if (const char* env = std::getenv("WPIC_THREADS")) {
    const int n = std::atoi(env);
    if (n >= 1) return n;
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

// Runs fn(i) for i in [0, n) on a small pool; fn must handle its own locking.
inline void parallel_for(int n, const std::function<void(int)>& fn, int threads = 0) {
  if (threads <= 0) threads = default_thread_count();
  threads = std::min(threads, n);
  if (threads <= 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::vector<std::thread> pool;
  pool.reserve(threads);
  for (int t = 0; t < threads; ++t)
    pool.emplace_back([&] {
      int i;
      while ((i = next.fetch_add(1)) < n) fn(i);
    });
  for (auto& th : pool) th.join();
}

}  // namespace wpic
