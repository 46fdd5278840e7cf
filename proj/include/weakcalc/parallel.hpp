#pragma once

#include <functional>

#include "weakcalc/types.hpp"

namespace weakcalc {

/// Number of worker threads used by per-point loops. Defaults to the
/// WEAKCALC_THREADS environment variable, else hardware concurrency.
int thread_count();
void set_thread_count(int n);

/// Runs body(i) for i in [0, n). Each index must only write its own output
/// slot, so results do not depend on the thread count.
void parallel_for(Index n, const std::function<void(Index)>& body);

}  // namespace weakcalc
