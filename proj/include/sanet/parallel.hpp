#pragma once

#include <atomic>
#include <exception>
#include <functional>
#include <thread>
#include <vector>

namespace sanet::parallel {

/// Process-wide worker cap. Outputs never depend on it: work items are
/// independent and every reduction happens in index order afterwards.
int max_threads();
void set_max_threads(int n);

/// Run fn(0..n-1), possibly concurrently. Each index must touch only its
/// own output slice. The first exception thrown is rethrown to the caller.
template <typename Fn>
void for_each_index(int n, Fn&& fn) {
    const int workers = std::min(n, max_threads());
    if (workers <= 1) {
        for (int i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<int> next{0};
    std::exception_ptr error;
    std::atomic<bool> failed{false};
    auto run = [&] {
        for (;;) {
            const int i = next.fetch_add(1);
            if (i >= n || failed.load()) return;
            try {
                fn(i);
            } catch (...) {
                if (!failed.exchange(true)) error = std::current_exception();
                return;
            }
        }
    };
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (int t = 0; t < workers; ++t) pool.emplace_back(run);
    for (auto& th : pool) th.join();
    if (error) std::rethrow_exception(error);
}

} // namespace sanet::parallel
