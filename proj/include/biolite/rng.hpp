#pragma once

#include <cstdint>
#include <cstring>
#include <string_view>
#include <vector>

namespace biolite {

// Deterministic RNG with a stable algorithm (splitmix64 seeding + xoshiro256**).
// std::mt19937 + std::uniform_* would work, but distribution implementations
// differ across standard libraries; this keeps seeded artifacts (weights,
// synthetic datasets, shuffles) byte-identical across toolchains.
class Rng {
public:
    explicit Rng(uint64_t seed) {
        uint64_t x = seed;
        for (auto& s : state_) {
            // splitmix64
            x += 0x9e3779b97f4a7c15ULL;
            uint64_t z = x;
            z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
            z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
            s = z ^ (z >> 31);
        }
    }

    uint64_t next_u64() {
        // xoshiro256**
        const uint64_t result = rotl(state_[1] * 5, 7) * 9;
        const uint64_t t = state_[1] << 17;
        state_[2] ^= state_[0];
        state_[3] ^= state_[1];
        state_[1] ^= state_[2];
        state_[0] ^= state_[3];
        state_[2] ^= t;
        state_[3] = rotl(state_[3], 45);
        return result;
    }

    // Uniform in [0, bound) without modulo bias (rejection sampling).
    uint64_t next_below(uint64_t bound) {
        if (bound <= 1) return 0;
        const uint64_t threshold = (0 - bound) % bound;
        for (;;) {
            uint64_t r = next_u64();
            if (r >= threshold) return r % bound;
        }
    }

    // Uniform in [0, 1) with 53 bits of precision.
    double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    float next_float() { return static_cast<float>(next_u64() >> 40) * 0x1.0p-24f; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * next_double(); }

    // Box-Muller; one value per call, spare discarded to keep draws independent
    // of call parity.
    double normal(double mean = 0.0, double stddev = 1.0);

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (size_t i = v.size(); i > 1; --i) {
            size_t j = static_cast<size_t>(next_below(i));
            std::swap(v[i - 1], v[j]);
        }
    }

private:
    static uint64_t rotl(uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }
    uint64_t state_[4];
};

// Stable sub-stream derivation: hash (seed, purpose, index) with FNV-1a so
// every consumer of randomness owns an independent, reproducible stream.
uint64_t derive_seed(uint64_t seed, std::string_view purpose, uint64_t index = 0);

} // namespace biolite
