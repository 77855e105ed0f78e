#pragma once

#include <algorithm>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace rswitch {

/// Runs fn(k) for k in [0, n) on up to `threads` workers using contiguous blocks.
/// Results must be written to per-index slots so the outcome is independent of scheduling.
/// The first exception thrown by any worker is rethrown on the calling thread.
template <class Fn>
void parallel_for(std::size_t n, unsigned threads, Fn&& fn) {
    const std::size_t workers = std::min<std::size_t>(std::max(1u, threads), n);
    if (workers <= 1) {
        for (std::size_t k = 0; k < n; ++k) fn(k);
        return;
    }
    std::exception_ptr failure;
    std::mutex failure_mutex;
    std::vector<std::thread> pool;
    pool.reserve(workers);
    const std::size_t block = (n + workers - 1) / workers;
    for (std::size_t w = 0; w < workers; ++w) {
        const std::size_t begin = w * block;
        const std::size_t end = std::min(n, begin + block);
        pool.emplace_back([&, begin, end] {
            try {
                for (std::size_t k = begin; k < end; ++k) fn(k);
            } catch (...) {
                std::lock_guard lock(failure_mutex);
                if (!failure) failure = std::current_exception();
            }
        });
    }
    for (auto& t : pool) t.join();
    if (failure) std::rethrow_exception(failure);
}

}  // namespace rswitch
