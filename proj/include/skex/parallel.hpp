#pragma once

#include <cstdint>
#include <functional>
#include <vector>

namespace skex {

// Worker count: explicit request, else SKEX_THREADS, else hardware concurrency.
int resolve_threads(int requested = 0);

// Splits [0, n) into contiguous ranges and runs fn(begin, end) on each, using
// at most `threads` workers. fn must only write to disjoint state per index.
void parallel_for(std::int64_t n, int threads,
                  const std::function<void(std::int64_t, std::int64_t)>& fn);

// Deterministic parallel reduction: [0, n) is cut into fixed-size blocks
// (independent of the worker count), each block is reduced by fn, and the
// per-block results are summed in block order.
double parallel_sum(std::int64_t n, int threads,
                    const std::function<double(std::int64_t, std::int64_t)>& block_fn,
                    std::int64_t block_size = 8192);

}  // namespace skex
