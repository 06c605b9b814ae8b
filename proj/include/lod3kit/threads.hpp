#pragma once

#include <algorithm>
#include <cstddef>
#include <exception>
#include <thread>
#include <vector>

namespace lod3kit {

/// Runs fn(i) for i in [0, n) on up to `threads` workers. Work is split
/// into fixed contiguous blocks by index, so which thread computes which
/// item does not depend on scheduling. Results must be written to
/// per-index slots (no shared accumulation) for thread-count-independent
/// output; the first exception thrown by any worker is rethrown.
template <typename Fn>
void parallel_for(size_t n, int threads, Fn&& fn) {
  if (n == 0) return;
  int workers = std::max(1, threads);
  workers = static_cast<int>(std::min<size_t>(workers, n));
  if (workers == 1) {
    for (size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(workers);
  size_t block = (n + workers - 1) / workers;
  for (int w = 0; w < workers; ++w) {
    size_t begin = static_cast<size_t>(w) * block;
    size_t end = std::min(n, begin + block);
    if (begin >= end) break;
    pool.emplace_back([&, w, begin, end] {
      try {
        for (size_t i = begin; i < end; ++i) fn(i);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

}  // namespace lod3kit
