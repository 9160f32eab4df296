#include "fite/parallel.hpp"

#include <atomic>
#include <cstdlib>

namespace fite {

namespace {
std::atomic<int> g_threads{0};
}

int thread_count() {
  int n = g_threads.load(std::memory_order_relaxed);
  if (n > 0) return n;
  if (const char* env = std::getenv("FITE_THREADS")) {
    int v = std::atoi(env);
    if (v > 0) return v;
  }
  unsigned hc = std::thread::hardware_concurrency();
  return hc > 0 ? int(hc) : 1;
}

void set_thread_count(int n) { g_threads.store(n, std::memory_order_relaxed); }

}  // namespace fite
