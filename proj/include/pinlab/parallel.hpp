#pragma once

#include <atomic>
#include <cstdint>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

// Deterministic fan-out helper: tasks are claimed dynamically, but results
// land in index-order slots, so reducing the returned vector front to back
// gives bit-identical output for any worker count.

namespace pinlab {

inline unsigned resolve_workers(unsigned requested) {
    if (requested > 0) return requested;
    const unsigned hc = std::thread::hardware_concurrency();
    return hc > 0 ? hc : 1;
}

template <class T, class Fn>
std::vector<T> parallel_map(std::uint64_t n_tasks, unsigned workers, Fn&& fn) {
    std::vector<T> out(n_tasks);
    workers = resolve_workers(workers);
    if (workers <= 1 || n_tasks <= 1) {
        for (std::uint64_t i = 0; i < n_tasks; ++i) out[i] = fn(i);
        return out;
    }
    std::atomic<std::uint64_t> next{0};
    std::exception_ptr first_error;
    std::mutex error_mutex;
    const auto body = [&]() {
        try {
            for (;;) {
                const std::uint64_t i = next.fetch_add(1, std::memory_order_relaxed);
                if (i >= n_tasks) break;
                out[i] = fn(i);
            }
        } catch (...) {
            const std::lock_guard<std::mutex> lock(error_mutex);
            if (!first_error) first_error = std::current_exception();
            next.store(n_tasks, std::memory_order_relaxed); // drain remaining work
        }
    };
    std::vector<std::thread> pool;
    pool.reserve(workers - 1);
    for (unsigned w = 1; w < workers; ++w) pool.emplace_back(body);
    body();
    for (auto& t : pool) t.join();
    if (first_error) std::rethrow_exception(first_error);
    return out;
}

} // namespace pinlab
