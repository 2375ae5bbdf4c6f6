#ifndef ARML_PARALLEL_HPP
#define ARML_PARALLEL_HPP

#include "arml/types.hpp"

#include <algorithm>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace arml {

/// Resolves a worker count: a positive request wins, then `ARML_THREADS`, then the
/// hardware concurrency.
int resolve_threads(int requested);

/**
 * Runs `fn(i)` for every i in [0, n) on up to `threads` workers using contiguous
 * static chunks. The first exception thrown by any worker is rethrown on the caller.
 * `fn` must not touch shared mutable state except through disjoint per-index slots.
 */
template <class Fn>
void parallel_for(Index n, int threads, Fn &&fn) {
    const int workers = static_cast<int>(std::min<Index>(std::max(threads, 1), std::max<Index>(n, 1)));
    if (workers <= 1) {
        for (Index i = 0; i < n; ++i) fn(i);
        return;
    }
    std::exception_ptr failure;
    std::mutex failure_mutex;
    std::vector<std::thread> pool;
    pool.reserve(workers);
    const Index chunk = (n + workers - 1) / workers;
    for (int w = 0; w < workers; ++w) {
        const Index begin = w * chunk;
        const Index end = std::min(n, begin + chunk);
        if (begin >= end) break;
        pool.emplace_back([&, begin, end] {
            try {
                for (Index i = begin; i < end; ++i) fn(i);
            } catch (...) {
                std::lock_guard lock(failure_mutex);
                if (!failure) failure = std::current_exception();
            }
        });
    }
    for (auto &t : pool) t.join();
    if (failure) std::rethrow_exception(failure);
}

}  // namespace arml

#endif  // ARML_PARALLEL_HPP
