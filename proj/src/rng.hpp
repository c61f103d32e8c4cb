#pragma once

// Portable seeded randomness: SplitMix64 for stream derivation, mt19937_64
// for draws, and a bit-exact uniform double so outputs do not depend on the
// standard library's distribution implementations.

#include <cstdint>
#include <random>

namespace rydmap::detail {

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Independent sub-seed for stream `stream` of a run seeded with `seed`.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
    return splitmix64(splitmix64(seed) ^ splitmix64(stream + 0x632be59bd9b4e019ULL));
}

/// Stream tags used to keep independent purposes apart.
enum class Stream : std::uint64_t {
    exact_draws = 1,
    metropolis = 2,
    fill = 3,
    readout = 4,
    umc = 5,
};

inline std::uint64_t derive_seed(std::uint64_t seed, Stream tag, std::uint64_t index) {
    return derive_seed(derive_seed(seed, static_cast<std::uint64_t>(tag)), index);
}

class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next() { return engine_(); }

    /// Uniform in [0, 1) from the top 53 bits.
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    /// Uniform integer in [0, n) by rejection; n > 0.
    std::uint64_t below(std::uint64_t n) {
        const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % n);
        std::uint64_t x;
        do {
            x = engine_();
        } while (x >= limit);
        return x % n;
    }

    bool bernoulli(double p) { return uniform() < p; }

private:
    std::mt19937_64 engine_;
};

}  // namespace rydmap::detail
