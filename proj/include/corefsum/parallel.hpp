#pragma once

#include <atomic>
#include <cstdlib>
#include <string>
#include <thread>
#include <vector>

#include "corefsum/errors.hpp"

namespace corefsum {

// Worker count for read-only fan-out: min(items, hardware, COREFSUM_THREADS).
inline std::size_t worker_count(std::size_t items) {
    std::size_t n = std::max<std::size_t>(1, std::thread::hardware_concurrency());
    if (const char* env = std::getenv("COREFSUM_THREADS")) {
        char* end = nullptr;
        const long v = std::strtol(env, &end, 10);
        if (end == env || *end != '\0' || v < 1) {
            throw ValidationError("COREFSUM_THREADS must be a positive integer");
        }
        n = std::min<std::size_t>(n, static_cast<std::size_t>(v));
    }
    return std::max<std::size_t>(1, std::min(n, items));
}

// Runs fn(i) for i in [0, items). Each index writes its own output slot, so
// results are deterministic regardless of scheduling. Exceptions propagate
// from the first failing index.
template <typename Fn>
void parallel_for(std::size_t items, Fn&& fn) {
    const std::size_t workers = worker_count(items);
    if (workers <= 1) {
        for (std::size_t i = 0; i < items; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::exception_ptr> errors(workers);
    std::vector<std::thread> threads;
    threads.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) {
        threads.emplace_back([&, w]() {
            try {
                while (true) {
                    const std::size_t i = next.fetch_add(1);
                    if (i >= items) break;
                    fn(i);
                }
            } catch (...) {
                errors[w] = std::current_exception();
            }
        });
    }
    for (std::thread& t : threads) t.join();
    for (const auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }
}

}  // namespace corefsum
