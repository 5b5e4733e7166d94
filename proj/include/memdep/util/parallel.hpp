#pragma once

#include <functional>
#include <thread>
#include <vector>

namespace memdep {

// Runs fn(i) for i in [0,n) on up to `threads` workers. Work is split into
// contiguous chunks by worker index, so any per-worker accumulation the caller
// does can be merged in a fixed order afterwards. fn must not touch shared
// mutable state except through caller-provided per-worker slots.
inline void parallel_for(int n, int threads, const std::function<void(int item, int worker)>& fn) {
  if (n <= 0) return;
  if (threads < 1) threads = 1;
  int workers = std::min(threads, n);
  if (workers == 1) {
    for (int i = 0; i < n; ++i) fn(i, 0);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(workers);
  int base = n / workers, rem = n % workers;
  int start = 0;
  for (int w = 0; w < workers; ++w) {
    int count = base + (w < rem ? 1 : 0);
    int lo = start, hi = start + count;
    start = hi;
    pool.emplace_back([lo, hi, w, &fn] {
      for (int i = lo; i < hi; ++i) fn(i, w);
    });
  }
  for (auto& t : pool) t.join();
}

}  // namespace memdep
