#include "biolite/rng.hpp"

#include <cmath>

namespace biolite {

double Rng::normal(double mean, double stddev) {
    double u1 = next_double();
    double u2 = next_double();
    if (u1 < 1e-300) u1 = 1e-300;
    double r = std::sqrt(-2.0 * std::log(u1));
    return mean + stddev * r * std::cos(2.0 * M_PI * u2);
}

uint64_t derive_seed(uint64_t seed, std::string_view purpose, uint64_t index) {
    uint64_t h = 0xcbf29ce484222325ULL;
    auto mix_byte = [&h](uint8_t b) {
        h ^= b;
        h *= 0x100000001b3ULL;
    };
    for (int i = 0; i < 8; ++i) mix_byte(static_cast<uint8_t>(seed >> (8 * i)));
    for (char c : purpose) mix_byte(static_cast<uint8_t>(c));
    for (int i = 0; i < 8; ++i) mix_byte(static_cast<uint8_t>(index >> (8 * i)));
    return h;
}

} // namespace biolite
