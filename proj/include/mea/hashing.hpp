#pragma once

#include <cstdint>
#include <string_view>

namespace mea {

// 64-bit FNV-1a. Stable across platforms and runs; used for jackknife
// bucket assignment so that all of a unit's data lands in one bucket.
inline std::uint64_t fnv1a64(std::string_view s) {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

// splitmix64 step; the workhorse for seed derivation and simulation streams.
inline std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

// Derive an independent child seed from (parent, index). Used to split the
// master seed per replication and per unit so streams never overlap.
inline std::uint64_t derive_seed(std::uint64_t parent, std::uint64_t index) {
    std::uint64_t s = parent ^ (0x9E3779B97F4A7C15ULL * (index + 1));
    return splitmix64(s);
}

// Small deterministic RNG over a splitmix64 stream.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next_u64() { return splitmix64(state_); }

    // Uniform in the open interval (0, 1); safe for log().
    double next_unit_open() {
        return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
    }

    // Uniform in [0, 1).
    double next_unit() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

private:
    std::uint64_t state_;
};

}  // namespace mea
