#ifndef SPLITGATE_PARALLEL_HPP
#define SPLITGATE_PARALLEL_HPP

#include <algorithm>
#include <charconv>
#include <cstddef>
#include <cstdlib>
#include <exception>
#include <string_view>
#include <thread>
#include <vector>

namespace splitgate {

/// Worker count: SPLITGATE_THREADS when set to a positive integer, else the
/// hardware concurrency (at least 1).
inline unsigned thread_count()
{
    if (const char* env = std::getenv("SPLITGATE_THREADS")) {
        std::string_view text(env);
        unsigned value = 0;
        auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
        if (ec == std::errc() && ptr == text.data() + text.size() && value > 0)
            return value;
    }
    return std::max(1u, std::thread::hardware_concurrency());
}

/// Runs body(i) for i in [0, n) over contiguous chunks. Callers write into
/// pre-sized slots indexed by i, so results never depend on scheduling. The
/// exception thrown for the lowest chunk is rethrown.
template <class Body>
void parallel_for(std::size_t n, Body&& body)
{
    const std::size_t workers = std::min<std::size_t>(thread_count(), n);
    if (workers <= 1) {
        for (std::size_t i = 0; i < n; ++i)
            body(i);
        return;
    }
    std::vector<std::exception_ptr> errors(workers);
    std::vector<std::thread> threads;
    threads.reserve(workers);
    const std::size_t chunk = (n + workers - 1) / workers;
    for (std::size_t w = 0; w < workers; ++w) {
        threads.emplace_back([&, w] {
            const std::size_t begin = w * chunk;
            const std::size_t end = std::min(n, begin + chunk);
            try {
                for (std::size_t i = begin; i < end; ++i)
                    body(i);
            } catch (...) {
                errors[w] = std::current_exception();
            }
        });
    }
    for (auto& t : threads)
        t.join();
    for (auto& e : errors)
        if (e)
            std::rethrow_exception(e);
}

} // namespace splitgate

#endif // SPLITGATE_PARALLEL_HPP
