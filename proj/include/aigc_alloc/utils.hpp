#pragma once

#include <cstdint>
#include <cstdlib>
#include <cstring>
#include <span>
#include <thread>

namespace aigc {

// Worker-thread cap for parallel sections (oracle partitioning, policy
// evaluation fan-out, per-seed runs). Defaults to the hardware concurrency;
// the AIGC_ALLOC_THREADS environment variable caps it.
inline int worker_threads() {
    int count = static_cast<int>(std::thread::hardware_concurrency());
    if (count < 1) count = 1;
    if (const char* env = std::getenv("AIGC_ALLOC_THREADS")) {
        const int cap = std::atoi(env);
        if (cap >= 1 && cap < count) count = cap;
        if (cap >= 1 && count < 1) count = cap;
    }
    return count;
}

inline std::uint64_t fnv1a64(const void* bytes, std::size_t length) {
    const unsigned char* p = static_cast<const unsigned char*>(bytes);
    std::uint64_t hash = 0xCBF29CE484222325ULL;
    for (std::size_t i = 0; i < length; ++i) {
        hash ^= p[i];
        hash *= 0x100000001B3ULL;
    }
    return hash;
}

inline std::uint64_t hash_doubles(std::span<const double> values) {
    return fnv1a64(values.data(), values.size() * sizeof(double));
}

}  // namespace aigc
