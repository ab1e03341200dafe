#pragma once

#include <cmath>
#include <cstdint>

namespace lldiff {

// splitmix64: used to expand/mix seeds into independent stream selectors.
inline uint64_t splitmix64(uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// PCG32 (O'Neill). Small, fast, reproducible across platforms; every random
// draw in the project flows through this so results are bit-stable.
struct Pcg32 {
    uint64_t state = 0x853c49e6748fea9bULL;
    uint64_t inc = 0xda3e39cb94b95bdbULL;

    Pcg32() = default;
    Pcg32(uint64_t seed, uint64_t stream = 0) { reseed(seed, stream); }

    void reseed(uint64_t seed, uint64_t stream = 0) {
        state = 0;
        inc = (stream << 1u) | 1u;
        next_u32();
        state += seed;
        next_u32();
    }

    uint32_t next_u32() {
        uint64_t old = state;
        state = old * 6364136223846793005ULL + inc;
        uint32_t xorshifted = (uint32_t)(((old >> 18u) ^ old) >> 27u);
        uint32_t rot = (uint32_t)(old >> 59u);
        return (xorshifted >> rot) | (xorshifted << ((-rot) & 31));
    }

    // uniform in [0,1): 32-bit mantissa scaled down
    double next_double() { return next_u32() * (1.0 / 4294967296.0); }
    float next_float() { return (float)(next_u32() * (1.0 / 4294967296.0)); }

    // uniform integer in [0, n) without modulo bias
    uint32_t next_below(uint32_t n) {
        if (n <= 1) return 0;
        uint32_t threshold = (uint32_t)(-n) % n;
        for (;;) {
            uint32_t r = next_u32();
            if (r >= threshold) return r % n;
        }
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * next_double(); }

    // Box-Muller; one value per call keeps draw counts easy to reason about
    // for determinism (no cached spare).
    double normal() {
        // u1 in (0,1] so log() is finite
        double u1 = (next_u32() + 1.0) * (1.0 / 4294967296.0);
        double u2 = next_u32() * (1.0 / 4294967296.0);
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
    }
};

// Derived stream: hash all identifiers together so (seed, scale, patch) and
// similar tuples give independent, order-insensitive streams.
inline Pcg32 derive_stream(uint64_t seed, uint64_t a, uint64_t b = 0, uint64_t c = 0) {
    uint64_t h = splitmix64(seed ^ 0x243f6a8885a308d3ULL);
    h = splitmix64(h ^ a);
    h = splitmix64(h ^ b);
    h = splitmix64(h ^ c);
    return Pcg32(h, splitmix64(h));
}

}  // namespace lldiff
