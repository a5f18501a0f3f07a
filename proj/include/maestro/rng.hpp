#pragma once

#include <cstdint>
#include <span>
#include <string_view>

namespace maestro {

// Deterministic counter-based RNG with named stream splitting. Every random
// draw in the project flows from one global seed through child() calls, so a
// run is reproducible regardless of thread scheduling or call interleaving.
//
// The generator is splitmix64; child streams are derived by folding a label
// hash (or index) into the parent state without advancing the parent.
class RngStream {
public:
    explicit RngStream(std::uint64_t seed) : state_(mix(seed ^ kInit)) {}

    // Derived streams. Pure: the parent is not advanced.
    RngStream child(std::string_view label) const {
        return RngStream(FromState{}, mix(state_ ^ fnv1a64(label)));
    }
    RngStream child(std::uint64_t index) const {
        return RngStream(FromState{}, mix(state_ ^ mix(index + 0x9e3779b97f4a7c15ULL)));
    }

    std::uint64_t next_u64() {
        state_ += 0x9e3779b97f4a7c15ULL;
        return mix(state_);
    }

    // Uniform in [0, 1). 53-bit mantissa, platform independent.
    double next_unit() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    // Uniform integer in [0, n). n must be >= 1.
    std::uint64_t next_below(std::uint64_t n) {
        // Multiplicative range reduction; bias is negligible for desk-scale n.
        unsigned __int128 wide = static_cast<unsigned __int128>(next_u64()) * n;
        return static_cast<std::uint64_t>(wide >> 64);
    }

    // Draws an index from an unnormalized non-negative weight vector.
    std::size_t categorical(std::span<const double> weights) {
        double total = 0.0;
        for (double w : weights) total += w;
        double r = next_unit() * total;
        double acc = 0.0;
        for (std::size_t i = 0; i < weights.size(); ++i) {
            acc += weights[i];
            if (r < acc) return i;
        }
        return weights.empty() ? 0 : weights.size() - 1;
    }

    bool bernoulli(double p) { return next_unit() < p; }

    static std::uint64_t fnv1a64(std::string_view s) {
        std::uint64_t h = 0xcbf29ce484222325ULL;
        for (unsigned char c : s) {
            h ^= c;
            h *= 0x100000001b3ULL;
        }
        return h;
    }

private:
    struct FromState {};
    RngStream(FromState, std::uint64_t state) : state_(state) {}

    static std::uint64_t mix(std::uint64_t z) {
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    static constexpr std::uint64_t kInit = 0x5851f42d4c957f2dULL;

    std::uint64_t state_;
};

} // namespace maestro
