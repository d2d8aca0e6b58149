#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "morphguard/linalg.hpp"
#include "morphguard/sample.hpp"

namespace morphguard {

/// Synthetic identities: one unit prototype per class and a two-way split of
/// the classes. subset_of[c] is 1 or 2.
struct IdentityUniverse {
    std::size_t classes = 0;
    std::size_t input_dim = 0;
    std::vector<Vec> prototypes;
    std::vector<int> subset_of;
    double spread = 0.0;
    std::uint64_t seed = 0;
};

struct SynthResult {
    IdentityUniverse universe;
    std::vector<Sample> bona_fides;  // identity-major: all samples of class 0, then class 1, ...
};

/// Prototypes uniform on the unit sphere; sample = normalize(prototype + spread * N(0, I)).
/// Requires an even class count >= 2, samples_per_class >= 2, spread > 0.
SynthResult synth_identities(std::size_t classes, std::size_t samples_per_class, std::size_t input_dim, double spread,
                             std::uint64_t seed);

/// Seeded balanced partition into subsets {1, 2}; sizes differ by at most one.
std::vector<int> split_identities(std::size_t classes, std::uint64_t seed);

/// A cross-subset morph pair. identity_a / sample_a always come from subset 1.
struct MorphPair {
    int identity_a = 0;
    int identity_b = 0;
    std::size_t sample_a = 0;  // index into the bona fide list the protocol was drawn from
    std::size_t sample_b = 0;

    bool operator==(const MorphPair&) const = default;
    auto operator<=>(const MorphPair&) const = default;
};

struct MorphPairProtocol {
    std::vector<MorphPair> pairs;
    std::uint64_t seed = 0;
};

/// Draws `num_morphs` distinct (subset-1 sample, subset-2 sample) pairs.
/// Throws CapacityError when fewer distinct pairs exist.
MorphPairProtocol pair_protocol(const IdentityUniverse& universe, std::span<const Sample> bona_fides,
                                std::size_t num_morphs, std::uint64_t seed);

/// input = normalize(alpha * a + (1 - alpha) * b). Head labels follow the
/// parents' subsets, not the argument order.
Sample make_morph(const Sample& a, const Sample& b, double alpha, std::span<const int> subset_of);

/// Same-identity blend at 0.5, labelled as that identity on both heads.
Sample make_selfmorph(const Sample& a, const Sample& b);

struct MixRatios {
    double bona_fide = 2.0;
    double morph = 1.0;
    double selfmorph = 1.0;

    bool operator==(const MixRatios&) const = default;
};

/// Number of morphs and selfmorphs implied by `ratios` for a bona fide pool.
struct MixCounts {
    std::size_t bona_fide = 0;
    std::size_t morph = 0;
    std::size_t selfmorph = 0;
};
MixCounts mix_counts(const MixRatios& ratios, std::size_t bona_fides, std::size_t protocol_size);

/// Bona fides, the first protocol morphs and random selfmorphs, interleaved
/// evenly. Throws CapacityError when a pool is too small.
std::vector<Sample> build_training_set(const IdentityUniverse& universe, std::span<const Sample> bona_fides,
                                       const MorphPairProtocol& protocol, const MixRatios& ratios, double alpha,
                                       std::uint64_t seed);

/// Splits bona fides per identity: the last ceil(fraction * n_c) samples of
/// every identity are held out. Relative order is preserved.
struct HoldoutSplit {
    std::vector<Sample> train;
    std::vector<Sample> holdout;
};
HoldoutSplit holdout_split(std::span<const Sample> bona_fides, std::size_t classes, double fraction);

}  // namespace morphguard
