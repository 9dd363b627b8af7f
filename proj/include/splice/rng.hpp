#pragma once

#include <cstdint>

// Seeded draw streams used by the generator and the training harness.
// splitmix64 is fixed here (rather than std::mt19937 plus distribution
// objects) so every byte of generated data is reproducible from the seed
// alone, independent of the standard library's distribution algorithms.

namespace splice::rng {

inline uint64_t splitmix64(uint64_t& state) {
    state += 0x9e3779b97f4a7c15ull;
    uint64_t z = state;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

// Derives an independent stream seed from (base, salt).
inline uint64_t mix(uint64_t base, uint64_t salt) {
    uint64_t s = base;
    uint64_t h = splitmix64(s);
    s = h ^ (salt + 0x9e3779b97f4a7c15ull);
    return splitmix64(s);
}

struct Stream {
    uint64_t state;

    explicit Stream(uint64_t seed) : state(seed) {}

    uint64_t next() { return splitmix64(state); }

    // [0, 1), 53-bit resolution
    double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + uniform() * (hi - lo); }

    // Inclusive bounds. Modulo bias is irrelevant at these range sizes.
    int uniform_int(int lo, int hi) {
        return lo + static_cast<int>(next() % static_cast<uint64_t>(hi - lo + 1));
    }

    bool coin() { return (next() & 1) != 0; }
};

} // namespace splice::rng
