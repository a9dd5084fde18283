#pragma once

#include <cmath>
#include <cstdint>
#include <string_view>

namespace riskmin {

// SplitMix64 finalizer; full-avalanche mix of a 64-bit word.
constexpr std::uint64_t mix64(std::uint64_t x) {
    x ^= x >> 30;
    x *= 0xBF58476D1CE4E5B9ull;
    x ^= x >> 27;
    x *= 0x94D049BB133111EBull;
    x ^= x >> 31;
    return x;
}

constexpr std::uint64_t fnv1a64(std::string_view s) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (char c : s) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001b3ull;
    }
    return h;
}

// Counter-based stream keyed by (seed, purpose tag, item index).
//
// Every draw is a pure function of (key, counter), so any slice of work can be
// reproduced in isolation: re-deriving the same (seed, tag, index) replays the
// exact sequence regardless of what other streams consumed. This is the only
// source of randomness in the library; modules take streams as arguments and
// never seed anything themselves.
class RngStream {
public:
    RngStream(std::uint64_t seed, std::string_view tag, std::uint64_t index = 0)
        : key_(mix64(mix64(seed + 0x9E3779B97F4A7C15ull) ^ fnv1a64(tag)) ^
               mix64((index + 1) * 0xD1B54A32D192ED03ull)) {}

    std::uint64_t next_u64() {
        ++counter_;
        return mix64(key_ ^ mix64(counter_ * 0x9E3779B97F4A7C15ull));
    }

    // Uniform on [0, 1), 53-bit resolution.
    double next_unit() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    // Uniform on [lo, hi).
    double next_range(double lo, double hi) { return lo + (hi - lo) * next_unit(); }

    // Standard normal via Box-Muller. Both uniforms are consumed every call
    // (no cached spare), keeping the draw a pure function of the counter.
    double next_gauss() {
        const double u1 = static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;  // (0, 1]
        const double u2 = next_unit();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925287 * u2);
    }

    // Unbiased integer in [0, n).
    std::uint64_t next_below(std::uint64_t n) {
        const std::uint64_t limit = ~0ull - ~0ull % n;
        std::uint64_t v = next_u64();
        while (v >= limit) v = next_u64();
        return v % n;
    }

private:
    std::uint64_t key_;
    std::uint64_t counter_ = 0;
};

}  // namespace riskmin
