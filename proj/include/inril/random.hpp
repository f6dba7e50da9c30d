#pragma once

#include <cstdint>
#include <random>

namespace inril {

using Rng = std::mt19937_64;

/// SplitMix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t x) noexcept {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

/// Named random streams. Each consumer of randomness draws from its own
/// stream so that adding a consumer never perturbs another's draws.
enum class Stream : std::uint64_t {
    kInit = 1,
    kRollout = 2,
    kIlBatch = 3,
    kDemo = 4,
    kEval = 5,
    kTheory = 6,
    kSurgeryRollout = 7,
    kSweep = 8,
};

/// Derived seed for (base, stream, index). Pure function; used everywhere a
/// sub-seed is needed.
constexpr std::uint64_t derive_seed(std::uint64_t base, Stream stream, std::uint64_t index = 0) noexcept {
    return mix64(mix64(base ^ mix64(static_cast<std::uint64_t>(stream))) + mix64(index + 0x632BE59BD9B4E019ULL));
}

inline Rng make_rng(std::uint64_t base, Stream stream, std::uint64_t index = 0) {
    return Rng(derive_seed(base, stream, index));
}

/// Uniform in [0, 1) with 53 random bits. Spelled out so draws do not depend
/// on the standard library's distribution implementations.
inline double uniform01(Rng& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

inline double uniform(Rng& rng, double lo, double hi) { return lo + (hi - lo) * uniform01(rng); }

/// Standard normal via Box-Muller (one value per call, no cached state).
double standard_normal(Rng& rng);

/// Integer uniform in [0, n).
inline std::uint64_t uniform_index(Rng& rng, std::uint64_t n) {
    return static_cast<std::uint64_t>(uniform01(rng) * static_cast<double>(n)) % n;
}

}  // namespace inril
