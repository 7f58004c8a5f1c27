#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>

namespace qscope {

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

/// Stateless counter-based RNG.  Draws are keyed by (seed, point, stream,
/// counter) so sweep results do not depend on evaluation order.
struct CounterRng {
    std::uint64_t seed = 0;

    std::uint64_t bits(std::uint64_t point, std::uint64_t stream, std::uint64_t counter) const {
        std::uint64_t h = splitmix64(seed ^ 0x243f6a8885a308d3ull);
        h = splitmix64(h ^ point);
        h = splitmix64(h ^ (stream * 0x100000001b3ull));
        h = splitmix64(h ^ (counter * 0xc2b2ae3d27d4eb4full));
        return h;
    }

    /// Uniform in (0, 1].
    double uniform(std::uint64_t point, std::uint64_t stream, std::uint64_t counter) const {
        return (static_cast<double>(bits(point, stream, counter) >> 11) + 1.0) * 0x1.0p-53;
    }

    /// Standard normal via Box-Muller, deterministic per (point, draw).
    double gaussian(std::uint64_t point, std::uint64_t draw) const {
        double u1 = uniform(point, 2 * draw, 0);
        double u2 = uniform(point, 2 * draw + 1, 1);
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
    }
};

}  // namespace qscope
