#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <string_view>
#include <vector>

namespace cmi {

/// Counter-based 64-bit generator: output k is a SplitMix64 finalizer applied to
/// key + k * golden-ratio increment. Streams are identified by (seed, name) so
/// adding a consumer never shifts the draws of another.
class Rng {
public:
    using result_type = std::uint64_t;

    explicit Rng(std::uint64_t key = 0) : key_(mix(key)) {}

    /// Independent named sub-stream of a run seed ("data", "init", "sampling", ...).
    static Rng stream(std::uint64_t seed, std::string_view name);
    /// Child stream derived from this generator's key and an index.
    Rng split(std::uint64_t index) const;

    static constexpr result_type min() { return 0; }
    static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

    result_type operator()() { return next(); }
    result_type next() { return mix(key_ + (++counter_) * kGolden); }

    /// Uniform in [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
    /// Unbiased integer in [0, bound).
    std::uint64_t below(std::uint64_t bound);
    /// Standard normal via Box-Muller; the second variate is cached.
    double normal();
    double normal(double mean, double stddev) { return mean + stddev * normal(); }
    double exponential() { return -std::log1p(-uniform()); }

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            const auto j = static_cast<std::size_t>(below(i));
            std::swap(v[i - 1], v[j]);
        }
    }

    std::uint64_t counter() const { return counter_; }

private:
    static constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ull;
    static std::uint64_t mix(std::uint64_t z) {
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
        return z ^ (z >> 31);
    }

    std::uint64_t key_;
    std::uint64_t counter_ = 0;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

}  // namespace cmi
