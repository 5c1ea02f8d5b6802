#pragma once

#include <cstdint>
#include <exception>
#include <functional>
#include <thread>
#include <vector>

namespace eegdiff::detail {

/// Run fn(i) for i in [0, n). Work items must be independent; outputs may
/// not depend on the thread count. The first exception is rethrown in the
/// caller.
inline void parallel_for_impl(std::int64_t n, int threads, const std::function<void(std::int64_t)>& fn) {
    if (threads <= 1 || n <= 1) {
        for (std::int64_t i = 0; i < n; ++i) fn(i);
        return;
    }
    const int workers = static_cast<int>(std::min<std::int64_t>(threads, n));
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(static_cast<std::size_t>(workers));
    for (int w = 0; w < workers; ++w) {
        pool.emplace_back([&, w] {
            try {
                for (std::int64_t i = w; i < n; i += workers) fn(i);
            } catch (...) {
                errors[static_cast<std::size_t>(w)] = std::current_exception();
            }
        });
    }
    for (auto& t : pool) t.join();
    for (const auto& err : errors) {
        if (err) std::rethrow_exception(err);
    }
}

}  // namespace eegdiff::detail

namespace eegdiff {
inline void parallel_for(std::int64_t n, int threads, const std::function<void(std::int64_t)>& fn) {
    detail::parallel_for_impl(n, threads, fn);
}
}  // namespace eegdiff
