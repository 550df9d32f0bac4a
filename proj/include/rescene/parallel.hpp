#pragma once

#include <cstddef>
#include <functional>

namespace rescene {

// Process-wide worker count used by row-parallel loops. Defaults to the
// hardware concurrency; 1 disables threading.
void set_thread_count(int n);
int thread_count();

// Calls fn(begin, end) on contiguous, disjoint chunks of [0, n). Chunk
// boundaries depend only on n and the thread count, and every index is
// handled by exactly one call, so per-index outputs are thread-count
// independent.
void parallel_for(std::size_t n, const std::function<void(std::size_t, std::size_t)>& fn);

}  // namespace rescene
