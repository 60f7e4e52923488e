#pragma once

#include <cstdint>
#include <functional>

namespace kqf {

// KQF_THREADS environment variable when set and positive, otherwise
// hardware concurrency (at least 1).
int default_threads();

// Runs fn(begin, end) over a contiguous partition of [0, n) on `threads`
// workers. Chunk boundaries depend only on n and the thread count, and each
// worker writes disjoint output, so results are order-independent.
// threads <= 0 selects default_threads(). Exceptions from workers are
// rethrown on the caller thread.
void parallel_chunks(uint64_t n, int threads,
                     const std::function<void(uint64_t, uint64_t)>& fn);

}  // namespace kqf
