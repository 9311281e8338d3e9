#pragma once

#include <atomic>
#include <cstddef>
#include <exception>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

namespace bucksmc {

inline unsigned effective_workers(unsigned requested) {
    if (requested != 0) return requested;
    const unsigned hc = std::thread::hardware_concurrency();
    return hc == 0 ? 1 : hc;
}

/// Runs fn(0..n-1) across workers. Callers index into preallocated result
/// slots, so scheduling cannot change the outcome. The first exception is
/// rethrown after all workers stop.
inline void parallel_for(std::size_t n, unsigned workers,
                         const std::function<void(std::size_t)>& fn) {
    workers = effective_workers(workers);
    if (workers <= 1 || n <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::once_flag once;
    std::exception_ptr eptr;
    auto run = [&] {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= n) return;
            try {
                fn(i);
            } catch (...) {
                std::call_once(once, [&] { eptr = std::current_exception(); });
                return;
            }
        }
    };
    {
        std::vector<std::jthread> pool;
        for (unsigned w = 0; w + 1 < workers; ++w) pool.emplace_back(run);
        run();
    }
    if (eptr) std::rethrow_exception(eptr);
}

} // namespace bucksmc
