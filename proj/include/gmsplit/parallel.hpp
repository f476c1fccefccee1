#ifndef GMSPLIT_PARALLEL_HPP
#define GMSPLIT_PARALLEL_HPP

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <exception>
#include <string>
#include <thread>
#include <vector>

namespace gmsplit {

/// Worker count: GMSPLIT_THREADS if set, else the hardware concurrency.
inline unsigned default_thread_count()
{
    if (const char* env = std::getenv("GMSPLIT_THREADS")) {
        try {
            const int v = std::stoi(env);
            if (v > 0) {
                return static_cast<unsigned>(v);
            }
        } catch (const std::exception&) {
        }
    }
    return std::max(1u, std::thread::hardware_concurrency());
}

/**
 * @brief Calls f(i) for i in [0, n) on a small thread pool.
 *
 * Callers write results into slot i only, so output never depends on the
 * schedule. If any call throws, the exception with the lowest index is
 * rethrown after all workers finish.
 */
template <class F>
void parallel_for(std::size_t n, F&& f, unsigned threads = 0)
{
    if (threads == 0) {
        threads = default_thread_count();
    }
    threads = static_cast<unsigned>(std::min<std::size_t>(threads, n));
    if (threads <= 1) {
        for (std::size_t i = 0; i < n; ++i) {
            f(i);
        }
        return;
    }
    std::vector<std::exception_ptr> errors(n);
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    pool.reserve(threads);
    for (unsigned t = 0; t < threads; ++t) {
        pool.emplace_back([&] {
            for (std::size_t i = next++; i < n; i = next++) {
                try {
                    f(i);
                } catch (...) {
                    errors[i] = std::current_exception();
                }
            }
        });
    }
    for (auto& th : pool) {
        th.join();
    }
    for (auto& e : errors) {
        if (e) {
            std::rethrow_exception(e);
        }
    }
}

} // namespace gmsplit

#endif // GMSPLIT_PARALLEL_HPP
