#pragma once

#include <algorithm>
#include <cstdint>
#include <cstdlib>
#include <exception>
#include <functional>
#include <initializer_list>
#include <thread>
#include <vector>

namespace fedsub {

// splitmix64 step; used to derive independent stream seeds.
inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// Combine a base seed with stream tags (round index, client index, ...).
// Every RNG in the simulator is seeded through this, never from global state,
// so results are independent of thread scheduling.
inline std::uint64_t mix_seed(std::uint64_t base, std::initializer_list<std::uint64_t> tags) {
    std::uint64_t s = splitmix64(base);
    for (std::uint64_t t : tags) s = splitmix64(s ^ (t + 0x9e3779b97f4a7c15ULL));
    return s;
}

// Number of worker threads: FEDSUB_THREADS env var, 0/unset = hardware.
inline unsigned worker_threads() {
    if (const char* env = std::getenv("FEDSUB_THREADS")) {
        const long v = std::strtol(env, nullptr, 10);
        if (v > 0) return static_cast<unsigned>(v);
    }
    const unsigned hw = std::thread::hardware_concurrency();
    return hw > 0 ? hw : 1;
}

// Run fn(i) for i in [0, n). Work items must be independent; each writes only
// its own output slot, so the result does not depend on scheduling.
inline void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn) {
    const unsigned threads = static_cast<unsigned>(std::min<std::size_t>(worker_threads(), n));
    if (threads <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(threads);
    pool.reserve(threads);
    for (unsigned t = 0; t < threads; ++t) {
        pool.emplace_back([&, t] {
            try {
                for (std::size_t i = t; i < n; i += threads) fn(i);
            } catch (...) {
                errors[t] = std::current_exception();
            }
        });
    }
    for (auto& th : pool) th.join();
    for (const std::exception_ptr& e : errors)
        if (e) std::rethrow_exception(e);
}

} // namespace fedsub
