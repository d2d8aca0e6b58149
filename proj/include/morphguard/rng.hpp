#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <span>
#include <utility>

namespace morphguard {

/// SplitMix64 generator with portable derived distributions.
///
/// Every random draw in the library goes through this type so that runs are
/// reproducible across compilers and standard libraries (the std::
/// distributions are implementation-defined). The algorithms are:
///
///   next():     state += 0x9E3779B97F4A7C15, then the SplitMix64 finalizer
///               z = (z ^ z>>30) * 0xBF58476D1CE4E5B9
///               z = (z ^ z>>27) * 0x94D049BB133111EB
///               return z ^ z>>31
///   uniform():  (next() >> 11) * 2^-53, in [0, 1)
///   below(n):   rejection sampling, x = next() accepted when x >= (2^64 - n) mod n,
///               returns x mod n
///   normal():   Box-Muller, u1 = 1 - uniform(), u2 = uniform(),
///               sqrt(-2 ln u1) * cos(2 pi u2); one normal per two uniforms
///   stream(seed, k): independent child generator seeded with mix(seed + (k+1) * golden)
class Rng {
public:
    static constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;

    explicit Rng(std::uint64_t seed) : state_(seed) {}

    static constexpr std::uint64_t mix(std::uint64_t z) {
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

    /// Seed of the k-th child stream of `seed`.
    static constexpr std::uint64_t derive(std::uint64_t seed, std::uint64_t k) {
        return mix(seed + (k + 1) * kGolden);
    }

    static Rng stream(std::uint64_t seed, std::uint64_t k) { return Rng(derive(seed, k)); }

    std::uint64_t next() {
        state_ += kGolden;
        return mix(state_);
    }

    double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    std::uint64_t below(std::uint64_t n) {
        const std::uint64_t threshold = (0 - n) % n;
        for (;;) {
            const std::uint64_t x = next();
            if (x >= threshold) return x % n;
        }
    }

    double normal() {
        const double u1 = 1.0 - uniform();
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
    }

    /// Fisher-Yates, walking from the back.
    template <typename T>
    void shuffle(std::span<T> items) {
        for (std::size_t i = items.size(); i > 1; --i) {
            const auto j = static_cast<std::size_t>(below(i));
            std::swap(items[i - 1], items[j]);
        }
    }

private:
    std::uint64_t state_;
};

}  // namespace morphguard
