#include "cmi/rng.hpp"

#include <cmath>
#include <numbers>

namespace cmi {

Rng Rng::stream(std::uint64_t seed, std::string_view name) {
    // FNV-1a over the stream name, folded with the seed.
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : name) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    return Rng(mix(seed) ^ h);
}

Rng Rng::split(std::uint64_t index) const { return Rng(key_ ^ mix(index + kGolden)); }

std::uint64_t Rng::below(std::uint64_t bound) {
    if (bound <= 1) return 0;
    const std::uint64_t limit = max() - max() % bound;
    std::uint64_t v;
    do {
        v = next();
    } while (v >= limit);
    return v % bound;
}

double Rng::normal() {
    if (has_spare_) {
        has_spare_ = false;
        return spare_;
    }
    double u1;
    do {
        u1 = uniform();
    } while (u1 <= 0.0);
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(theta);
    has_spare_ = true;
    return r * std::cos(theta);
}

}  // namespace cmi
