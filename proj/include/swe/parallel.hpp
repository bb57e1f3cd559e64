#pragma once

#include <atomic>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace swe {

/// Run fn(i) for i in [0,n) on up to `threads` workers (0 means hardware
/// concurrency). Each index is claimed by exactly one worker, so outputs
/// written per index are identical whatever the schedule. The first exception
/// wins and is rethrown on the caller thread.
template <typename Fn>
void parallel_for_indexed(std::size_t n, std::size_t threads, Fn&& fn) {
    if (n == 0) return;
    if (threads == 0) threads = std::max<std::size_t>(std::thread::hardware_concurrency(), 1);
    threads = std::min(threads, n);
    if (threads <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> cursor{0};
    std::exception_ptr first_error;
    std::mutex error_mutex;
    std::vector<std::thread> pool;
    pool.reserve(threads);
    for (std::size_t t = 0; t < threads; ++t) {
        pool.emplace_back([&] {
            for (;;) {
                const std::size_t i = cursor.fetch_add(1);
                if (i >= n) return;
                try {
                    fn(i);
                } catch (...) {
                    std::scoped_lock lock(error_mutex);
                    if (!first_error) first_error = std::current_exception();
                }
            }
        });
    }
    for (auto& th : pool) th.join();
    if (first_error) std::rethrow_exception(first_error);
}

} // namespace swe
