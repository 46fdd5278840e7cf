#include "weakcalc/parallel.hpp"

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <thread>
#include <vector>

namespace weakcalc {

namespace {

int initial_threads() {
  if (const char* env = std::getenv("WEAKCALC_THREADS")) {
    int n = std::atoi(env);
    if (n > 0) return n;
  }
  unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

std::atomic<int>& threads_setting() {
  static std::atomic<int> value{initial_threads()};
  return value;
}

}  // namespace

int thread_count() { return threads_setting().load(); }

void set_thread_count(int n) { threads_setting().store(std::max(1, n)); }

void parallel_for(Index n, const std::function<void(Index)>& body) {
  const int workers = static_cast<int>(std::min<Index>(thread_count(), n));
  if (workers <= 1 || n < 64) {
    for (Index i = 0; i < n; ++i) body(i);
    return;
  }
  std::atomic<Index> next{0};
  constexpr Index kChunk = 32;
  auto run = [&] {
    for (;;) {
      Index begin = next.fetch_add(kChunk);
      if (begin >= n) return;
      Index end = std::min(n, begin + kChunk);
      for (Index i = begin; i < end; ++i) body(i);
    }
  };
  std::vector<std::jthread> pool;
  pool.reserve(static_cast<std::size_t>(workers - 1));
  for (int t = 1; t < workers; ++t) pool.emplace_back(run);
  run();
}

}  // namespace weakcalc
