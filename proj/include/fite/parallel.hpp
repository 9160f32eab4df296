#pragma once

#include <algorithm>
#include <cstdint>
#include <functional>
#include <thread>
#include <vector>

namespace fite {

// Global worker-thread cap. 0 means hardware concurrency. Set once at startup
// (CLI/config); reads during parallel sections are benign.
int thread_count();
void set_thread_count(int n);

// Runs fn(begin, end) over disjoint contiguous chunks of [0, n). Chunk
// boundaries depend only on n and the thread cap, so any output written into
// disjoint slots is deterministic.
template <typename Fn>
void parallel_chunks(int64_t n, Fn&& fn) {
  if (n <= 0) return;
  int nt = std::min<int64_t>(thread_count(), n);
  if (nt <= 1) {
    fn(int64_t(0), n);
    return;
  }
  std::vector<std::thread> workers;
  workers.reserve(nt);
  int64_t chunk = (n + nt - 1) / nt;
  for (int t = 0; t < nt; ++t) {
    int64_t b = t * chunk;
    int64_t e = std::min<int64_t>(n, b + chunk);
    if (b >= e) break;
    workers.emplace_back([&fn, b, e] { fn(b, e); });
  }
  for (auto& w : workers) w.join();
}

}  // namespace fite
