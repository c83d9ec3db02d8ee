#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace iss {

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Child seed for a named sub-stream, so train/verify/rollout draws stay
/// independent and individually reproducible from one root seed.
inline std::uint64_t derive_seed(std::uint64_t root, std::uint64_t stream) {
    return splitmix64(root ^ splitmix64(stream + 0x517cc1b727220a95ULL));
}

namespace stream {
inline constexpr std::uint64_t weight_init = 1;
inline constexpr std::uint64_t train_batch = 2;
inline constexpr std::uint64_t goal_batch = 3;
inline constexpr std::uint64_t verify = 4;
inline constexpr std::uint64_t rollout = 5;
inline constexpr std::uint64_t oracle = 6;
}  // namespace stream

/// Deterministic RNG. Doubles are built from raw mt19937_64 output, not
/// std::uniform_real_distribution, so sequences are identical across
/// standard-library implementations.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : gen_(seed) {}

    std::uint64_t next_u64() { return gen_(); }

    /// Uniform in [0, 1).
    double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    double exponential() { return -std::log1p(-uniform()); }

    /// Index in [0, n).
    std::size_t index(std::size_t n) { return static_cast<std::size_t>(uniform() * static_cast<double>(n)) % n; }

private:
    std::mt19937_64 gen_;
};

}  // namespace iss
