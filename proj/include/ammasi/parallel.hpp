#pragma once

#include <cstdlib>
#include <functional>
#include <thread>
#include <vector>

namespace ammasi {

/// Thread cap for embarrassingly parallel stages. AMMASI_THREADS=1 forces
/// sequential execution; unset falls back to the hardware count.
inline unsigned thread_cap() {
  if (const char* env = std::getenv("AMMASI_THREADS")) {
    long v = std::strtol(env, nullptr, 10);
    if (v >= 1) return static_cast<unsigned>(v);
  }
  unsigned hc = std::thread::hardware_concurrency();
  return hc == 0 ? 1 : hc;
}

/// Runs fn(i) for i in [0,n). Each index owns its output slot, so results are
/// identical for any thread count.
inline void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn) {
  const unsigned threads = std::min<std::size_t>(thread_cap(), n);
  if (threads <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(threads);
  for (unsigned t = 0; t < threads; ++t) {
    pool.emplace_back([&, t] {
      for (std::size_t i = t; i < n; i += threads) fn(i);
    });
  }
  for (auto& th : pool) th.join();
}

}  // namespace ammasi
