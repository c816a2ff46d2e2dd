#pragma once

#include <algorithm>
#include <cstdlib>
#include <string>
#include <thread>
#include <vector>

namespace binpick {

// Worker count: BINPICK_THREADS caps it, hardware concurrency is the default.
inline int thread_count() {
    int hw = int(std::thread::hardware_concurrency());
    if (hw < 1) hw = 1;
    if (const char* env = std::getenv("BINPICK_THREADS")) {
        int cap = std::atoi(env);
        if (cap >= 1) return std::min(cap, hw);
    }
    return hw;
}

// Static block partition of [0, n). Each index is processed exactly once and
// results must be written to per-index slots, so the outcome is independent
// of the worker count.
template <typename F>
void parallel_for(size_t n, F&& body) {
    int workers = thread_count();
    if (n == 0) return;
    if (workers <= 1 || n == 1) {
        for (size_t i = 0; i < n; ++i) body(i);
        return;
    }
    size_t nthreads = std::min<size_t>(size_t(workers), n);
    std::vector<std::thread> pool;
    pool.reserve(nthreads);
    size_t chunk = (n + nthreads - 1) / nthreads;
    for (size_t t = 0; t < nthreads; ++t) {
        size_t lo = t * chunk;
        size_t hi = std::min(n, lo + chunk);
        if (lo >= hi) break;
        pool.emplace_back([lo, hi, &body] {
            for (size_t i = lo; i < hi; ++i) body(i);
        });
    }
    for (auto& th : pool) th.join();
}

} // namespace binpick
