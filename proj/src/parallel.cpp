#include "skex/parallel.hpp"

#include <algorithm>
#include <cstdlib>
#include <thread>

namespace skex {

int resolve_threads(int requested) {
    if (requested > 0) return requested;
    if (const char* env = std::getenv("SKEX_THREADS")) {
        int n = std::atoi(env);
        if (n > 0) return n;
    }
    unsigned hw = std::thread::hardware_concurrency();
    return hw > 0 ? static_cast<int>(hw) : 1;
}

void parallel_for(std::int64_t n, int threads,
                  const std::function<void(std::int64_t, std::int64_t)>& fn) {
    if (n <= 0) return;
    int t = std::min<std::int64_t>(resolve_threads(threads), n);
    if (t <= 1) {
        fn(0, n);
        return;
    }
    std::vector<std::thread> pool;
    pool.reserve(t);
    std::int64_t chunk = (n + t - 1) / t;
    for (int i = 0; i < t; ++i) {
        std::int64_t b = i * chunk;
        std::int64_t e = std::min(n, b + chunk);
        if (b >= e) break;
        pool.emplace_back([&fn, b, e] { fn(b, e); });
    }
    for (auto& th : pool) th.join();
}

double parallel_sum(std::int64_t n, int threads,
                    const std::function<double(std::int64_t, std::int64_t)>& block_fn,
                    std::int64_t block_size) {
    if (n <= 0) return 0.0;
    std::int64_t blocks = (n + block_size - 1) / block_size;
    std::vector<double> partial(blocks, 0.0);
    parallel_for(blocks, threads, [&](std::int64_t bb, std::int64_t be) {
        for (std::int64_t blk = bb; blk < be; ++blk) {
            std::int64_t b = blk * block_size;
            std::int64_t e = std::min(n, b + block_size);
            partial[blk] = block_fn(b, e);
        }
    });
    // Fixed block boundaries and a sequential final sum keep the result
    // independent of the worker count.
    double total = 0.0;
    for (double v : partial) total += v;
    return total;
}

}  // namespace skex
