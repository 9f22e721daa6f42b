#pragma once

// Counter-based random streams. Draw i of stream (seed, purpose) is a pure
// function of (seed, purpose, i), so independent purposes never interfere and
// results do not depend on call order or thread scheduling.

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <numbers>

namespace cvarmatch {

/// Purpose tags for substreams derived from one instance seed.
enum class Substream : std::uint64_t {
    Base = 1,          // innovations of the base series X
    Tilde = 2,         // innovations of the independent copy used for the noise
    Permutation = 3,   // hidden matching
    SystemMatrix = 4,  // Gaussian A' behind the system matrix
    Initialization = 5,
    Verification = 6,
};

/// SplitMix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

/// Stable 64-bit combination of several words; order matters.
inline std::uint64_t derive_seed(std::initializer_list<std::uint64_t> words) {
    std::uint64_t h = 0x243f6a8885a308d3ULL;
    for (std::uint64_t w : words) h = mix64(h ^ mix64(w));
    return h;
}

class CounterRng {
public:
    CounterRng(std::uint64_t seed, std::uint64_t stream)
        : key_(derive_seed({seed, stream})) {}
    CounterRng(std::uint64_t seed, Substream stream)
        : CounterRng(seed, static_cast<std::uint64_t>(stream)) {}

    std::uint64_t next_u64() { return mix64(key_ ^ mix64(counter_++)); }

    /// Uniform on the open interval (0, 1).
    double uniform() { return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53; }

    /// Standard normal via Box-Muller; each pair of uniforms yields two normals.
    double gaussian() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        const double u1 = uniform();
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double angle = 2.0 * std::numbers::pi * u2;
        spare_ = r * std::sin(angle);
        has_spare_ = true;
        return r * std::cos(angle);
    }

    /// Uniform integer in [0, n), unbiased (rejection on the top range).
    std::uint64_t below(std::uint64_t n) {
        const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
        std::uint64_t x;
        do {
            x = next_u64();
        } while (x >= limit);
        return x % n;
    }

    std::uint64_t counter() const { return counter_; }

private:
    std::uint64_t key_;
    std::uint64_t counter_ = 0;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

}  // namespace cvarmatch
