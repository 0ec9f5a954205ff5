#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

namespace aigc {

// Deterministic 64-bit PRNG used everywhere in the toolkit.
//
// Generator: std::mt19937_64 (its output sequence is pinned by the C++
// standard, so results are identical across compilers and platforms).
// Seeding and substream derivation use SplitMix64, so independent streams
// can be split off a master seed without disturbing the parent.
// Uniform and normal draws are implemented here rather than with
// std::*_distribution, whose output is implementation-defined.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : base_seed_(seed), gen_(splitmix64(seed)) {}

    // Independent substream; derivation depends only on (base seed, stream id).
    Rng derive(std::uint64_t stream) const {
        return Rng(splitmix64(base_seed_ ^ (0x9E3779B97F4A7C15ULL * (stream + 1))));
    }

    std::uint64_t next_u64() { return gen_(); }

    // Uniform in [0, 1) with 53-bit resolution.
    double uniform01() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

    // Uniform integer in [lo, hi], both inclusive.
    int uniform_int(int lo, int hi) {
        const std::uint64_t span = static_cast<std::uint64_t>(hi - lo) + 1;
        return lo + static_cast<int>(gen_() % span);
    }

    // Standard normal via Box-Muller; consumes exactly two uniforms per draw.
    double normal() {
        const double u1 = 1.0 - uniform01();  // (0, 1]
        const double u2 = uniform01();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
    }

    std::vector<double> normal_vector(std::size_t n) {
        std::vector<double> out(n);
        for (auto& v : out) v = normal();
        return out;
    }

    std::uint64_t base_seed() const { return base_seed_; }

    static std::uint64_t splitmix64(std::uint64_t x) {
        x += 0x9E3779B97F4A7C15ULL;
        x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
        x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
        return x ^ (x >> 31);
    }

    // Name recorded in run manifests so results can be reproduced across builds.
    static constexpr const char* kAlgorithmName = "mt19937_64+splitmix64-substreams";

private:
    std::uint64_t base_seed_;
    std::mt19937_64 gen_;
};

}  // namespace aigc
