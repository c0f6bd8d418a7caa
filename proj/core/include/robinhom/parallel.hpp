#pragma once

#include <cstddef>
#include <future>
#include <vector>

namespace robinhom {

/// Runs fn(i) for i in [0, n) with at most `threads` tasks in flight.
/// Results keep index order.
template <class Fn>
auto parallel_map(std::size_t n, int threads, Fn fn) -> std::vector<decltype(fn(std::size_t{}))>
{
    using R = decltype(fn(std::size_t{}));
    std::vector<R> out;
    out.reserve(n);
    if (threads <= 1) {
        for (std::size_t i = 0; i < n; ++i)
            out.push_back(fn(i));
        return out;
    }
    for (std::size_t start = 0; start < n; start += static_cast<std::size_t>(threads)) {
        std::vector<std::future<R>> batch;
        for (std::size_t i = start; i < n && i < start + static_cast<std::size_t>(threads); ++i)
            batch.push_back(std::async(std::launch::async, fn, i));
        for (auto& f : batch)
            out.push_back(f.get());
    }
    return out;
}

} // namespace robinhom
