#pragma once

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace nnk {

// Worker count: NK_THREADS if set and positive, else hardware concurrency.
inline unsigned thread_count() {
    if (const char* env = std::getenv("NK_THREADS")) {
        const int n = std::atoi(env);
        if (n > 0) return static_cast<unsigned>(n);
    }
    return std::max(1u, std::thread::hardware_concurrency());
}

// Runs f(i) for i in [0, n). Each index writes only its own slot, so
// results do not depend on scheduling. The first exception is rethrown.
template <class F>
void parallel_for(std::size_t n, F&& f) {
    const unsigned workers = static_cast<unsigned>(std::min<std::size_t>(thread_count(), n));
    if (workers <= 1) {
        for (std::size_t i = 0; i < n; ++i) f(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr err;
    std::mutex err_mu;
    auto run = [&] {
        for (std::size_t i; (i = next.fetch_add(1)) < n;) {
            try {
                f(i);
            } catch (...) {
                std::lock_guard lk(err_mu);
                if (!err) err = std::current_exception();
                next = n;
            }
        }
    };
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < workers; ++t) pool.emplace_back(run);
    for (auto& t : pool) t.join();
    if (err) std::rethrow_exception(err);
}

}  // namespace nnk
