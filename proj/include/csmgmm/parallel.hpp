#pragma once

#include <algorithm>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace csmgmm {

/// Number of worker threads used by the batch routines. Zero means "use the
/// hardware concurrency".
inline std::size_t& default_num_threads() {
    static std::size_t threads = 0;
    return threads;
}

/// Calls `fn(begin, end)` over contiguous, disjoint chunks of [0, n). Each
/// index is visited exactly once, so callers that write only to slot `i`
/// get results that do not depend on the number of workers.
template <class Function>
void parallel_for(std::size_t n, Function&& fn, std::size_t num_threads = 0) {
    if (num_threads == 0) {
        num_threads = default_num_threads();
    }
    if (num_threads == 0) {
        num_threads = std::max<std::size_t>(1, std::thread::hardware_concurrency());
    }
    num_threads = std::min(num_threads, std::max<std::size_t>(1, n / 64));
    if (num_threads <= 1) {
        fn(std::size_t{0}, n);
        return;
    }

    const std::size_t chunk = (n + num_threads - 1) / num_threads;
    std::vector<std::thread> workers;
    std::exception_ptr failure;
    std::mutex failure_lock;
    workers.reserve(num_threads);
    for (std::size_t t = 0; t < num_threads; ++t) {
        const std::size_t begin = t * chunk;
        const std::size_t end = std::min(n, begin + chunk);
        if (begin >= end) {
            break;
        }
        workers.emplace_back([&, begin, end]() {
            try {
                fn(begin, end);
            } catch (...) {
                std::lock_guard<std::mutex> guard(failure_lock);
                if (!failure) {
                    failure = std::current_exception();
                }
            }
        });
    }
    for (auto& w : workers) {
        w.join();
    }
    if (failure) {
        std::rethrow_exception(failure);
    }
}

}  // namespace csmgmm
