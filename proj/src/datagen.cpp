#include "morphguard/datagen.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <string>
#include <utility>

#include "morphguard/error.hpp"
#include "morphguard/rng.hpp"

namespace morphguard {

namespace {

// Child streams of the synthesis seed.
constexpr std::uint64_t kPrototypeStream = 0;
constexpr std::uint64_t kSplitStream = 1;
constexpr std::uint64_t kNoiseStream = 2;

Vec normalized(Vec v) {
    const double n = norm2(v);
    if (!(n > 0.0) || !std::isfinite(n)) throw NumericInputError("cannot normalize a zero or non-finite vector");
    for (double& x : v) x /= n;
    return v;
}

int single_identity(const Sample& s) {
    if (s.source_ids.size() != 1) throw ProtocolError("parent sample must have exactly one source identity");
    return s.source_ids.front();
}

int subset_for(int identity, std::span<const int> subset_of) {
    if (identity < 0 || static_cast<std::size_t>(identity) >= subset_of.size())
        throw IndexError("identity " + std::to_string(identity) + " outside the subset map");
    return subset_of[static_cast<std::size_t>(identity)];
}

// Picks `count` distinct items out of `capacity` candidates. Dense requests
// enumerate and shuffle; sparse ones reject duplicates.
template <typename Key, typename Enumerate, typename Draw>
std::vector<Key> draw_distinct(std::size_t capacity, std::size_t count, Rng& rng, Enumerate enumerate, Draw draw) {
    if (count > capacity)
        throw CapacityError("requested " + std::to_string(count) + " distinct pairs but only " +
                            std::to_string(capacity) + " exist");
    std::vector<Key> out;
    if (count == 0) return out;
    if (2 * count > capacity) {
        out = enumerate();
        rng.shuffle(std::span<Key>(out));
        out.resize(count);
        return out;
    }
    std::set<Key> seen;
    out.reserve(count);
    while (out.size() < count) {
        Key k = draw();
        if (seen.insert(k).second) out.push_back(k);
    }
    return out;
}

}  // namespace

std::vector<int> split_identities(std::size_t classes, std::uint64_t seed) {
    if (classes < 2) throw ConfigError("need at least two identities to split");
    std::vector<std::size_t> order(classes);
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng(seed);
    rng.shuffle(std::span<std::size_t>(order));
    std::vector<int> subset(classes, 2);
    for (std::size_t k = 0; k < classes / 2; ++k) subset[order[k]] = 1;
    return subset;
}

SynthResult synth_identities(std::size_t classes, std::size_t samples_per_class, std::size_t input_dim, double spread,
                             std::uint64_t seed) {
    if (classes < 2) throw ConfigError("need at least two identities");
    if (classes % 2 != 0) throw ConfigError("identity count must be even for a balanced split");
    if (samples_per_class < 2) throw ConfigError("need at least two samples per identity");
    if (input_dim < 2) throw ConfigError("input dimension must be at least 2");
    if (!(spread > 0.0) || !std::isfinite(spread)) throw ConfigError("spread must be positive");

    SynthResult out;
    IdentityUniverse& u = out.universe;
    u.classes = classes;
    u.input_dim = input_dim;
    u.spread = spread;
    u.seed = seed;

    Rng proto_rng = Rng::stream(seed, kPrototypeStream);
    u.prototypes.reserve(classes);
    for (std::size_t c = 0; c < classes; ++c) {
        Vec p(input_dim);
        for (double& x : p) x = proto_rng.normal();
        u.prototypes.push_back(normalized(std::move(p)));
    }
    u.subset_of = split_identities(classes, Rng::derive(seed, kSplitStream));

    Rng noise = Rng::stream(seed, kNoiseStream);
    out.bona_fides.reserve(classes * samples_per_class);
    for (std::size_t c = 0; c < classes; ++c) {
        const int id = static_cast<int>(c);
        for (std::size_t k = 0; k < samples_per_class; ++k) {
            Vec x = u.prototypes[c];
            for (double& v : x) v += spread * noise.normal();
            out.bona_fides.push_back({normalized(std::move(x)), {id, id, SampleKind::BonaFide}, {id}});
        }
    }
    return out;
}

MorphPairProtocol pair_protocol(const IdentityUniverse& universe, std::span<const Sample> bona_fides,
                                std::size_t num_morphs, std::uint64_t seed) {
    std::vector<std::size_t> first, second;
    for (std::size_t i = 0; i < bona_fides.size(); ++i) {
        const int id = single_identity(bona_fides[i]);
        (subset_for(id, universe.subset_of) == 1 ? first : second).push_back(i);
    }
    MorphPairProtocol protocol;
    protocol.seed = seed;
    if (num_morphs == 0) return protocol;
    if (first.empty() || second.empty()) throw ProtocolError("both identity subsets need at least one sample");

    using Key = std::pair<std::size_t, std::size_t>;
    Rng rng(seed);
    const std::size_t capacity = first.size() * second.size();
    const auto keys = draw_distinct<Key>(
        capacity, num_morphs, rng,
        [&] {
            std::vector<Key> all;
            all.reserve(capacity);
            for (std::size_t a : first)
                for (std::size_t b : second) all.emplace_back(a, b);
            return all;
        },
        [&] {
            const std::size_t a = first[rng.below(first.size())];
            const std::size_t b = second[rng.below(second.size())];
            return Key{a, b};
        });

    protocol.pairs.reserve(keys.size());
    for (const auto& [a, b] : keys)
        protocol.pairs.push_back(
            {single_identity(bona_fides[a]), single_identity(bona_fides[b]), a, b});
    return protocol;
}

Sample make_morph(const Sample& a, const Sample& b, double alpha, std::span<const int> subset_of) {
    if (!(alpha > 0.0 && alpha < 1.0)) throw ConfigError("blend coefficient must lie in (0, 1)");
    if (a.input.size() != b.input.size()) throw ProtocolError("parents differ in input dimension");
    const int id_a = single_identity(a);
    const int id_b = single_identity(b);
    const int sub_a = subset_for(id_a, subset_of);
    const int sub_b = subset_for(id_b, subset_of);
    if (sub_a == sub_b) throw ProtocolError("morph parents come from the same subset");

    Vec x(a.input.size());
    for (std::size_t k = 0; k < x.size(); ++k) x[k] = alpha * a.input[k] + (1.0 - alpha) * b.input[k];
    const int head1 = sub_a == 1 ? id_a : id_b;
    const int head2 = sub_a == 1 ? id_b : id_a;
    return {normalized(std::move(x)), {head1, head2, SampleKind::Morph}, {head1, head2}};
}

Sample make_selfmorph(const Sample& a, const Sample& b) {
    if (a.input.size() != b.input.size()) throw ProtocolError("parents differ in input dimension");
    const int id = single_identity(a);
    if (single_identity(b) != id) throw ProtocolError("selfmorph parents have different identities");
    Vec x(a.input.size());
    for (std::size_t k = 0; k < x.size(); ++k) x[k] = 0.5 * a.input[k] + 0.5 * b.input[k];
    return {normalized(std::move(x)), {id, id, SampleKind::SelfMorph}, {id}};
}

MixCounts mix_counts(const MixRatios& r, std::size_t bona_fides, std::size_t protocol_size) {
    for (double v : {r.bona_fide, r.morph, r.selfmorph})
        if (!(v >= 0.0) || !std::isfinite(v)) throw ConfigError("mix ratios must be finite and nonnegative");
    if (r.bona_fide == 0.0 && r.morph == 0.0 && r.selfmorph == 0.0) throw ConfigError("mix ratios are all zero");

    // Counts are anchored on the first pool with a nonzero ratio.
    double unit = 0.0;
    if (r.bona_fide > 0.0)
        unit = static_cast<double>(bona_fides) / r.bona_fide;
    else if (r.morph > 0.0)
        unit = static_cast<double>(protocol_size) / r.morph;
    else
        unit = static_cast<double>(bona_fides) / r.selfmorph;
    const auto count = [unit](double ratio) { return static_cast<std::size_t>(std::llround(unit * ratio)); };
    return {r.bona_fide > 0.0 ? bona_fides : 0, count(r.morph), count(r.selfmorph)};
}

std::vector<Sample> build_training_set(const IdentityUniverse& universe, std::span<const Sample> bona_fides,
                                       const MorphPairProtocol& protocol, const MixRatios& ratios, double alpha,
                                       std::uint64_t seed) {
    const MixCounts counts = mix_counts(ratios, bona_fides.size(), protocol.pairs.size());
    if (counts.morph > protocol.pairs.size())
        throw CapacityError("protocol has " + std::to_string(protocol.pairs.size()) + " pairs, " +
                            std::to_string(counts.morph) + " morphs requested");

    std::vector<Sample> bf(bona_fides.begin(), bona_fides.begin() + static_cast<std::ptrdiff_t>(counts.bona_fide));

    std::vector<Sample> morphs;
    morphs.reserve(counts.morph);
    for (std::size_t i = 0; i < counts.morph; ++i) {
        const MorphPair& p = protocol.pairs[i];
        if (p.sample_a >= bona_fides.size() || p.sample_b >= bona_fides.size())
            throw IndexError("protocol sample index outside the bona fide list");
        morphs.push_back(make_morph(bona_fides[p.sample_a], bona_fides[p.sample_b], alpha, universe.subset_of));
    }

    // Selfmorph pairs: unordered (i < j) same-identity sample pairs.
    std::vector<std::vector<std::size_t>> by_identity(universe.classes);
    for (std::size_t i = 0; i < bona_fides.size(); ++i) {
        const int id = single_identity(bona_fides[i]);
        if (id < 0 || static_cast<std::size_t>(id) >= universe.classes) throw IndexError("identity outside universe");
        by_identity[static_cast<std::size_t>(id)].push_back(i);
    }
    std::size_t capacity = 0;
    for (const auto& members : by_identity) capacity += members.size() * (members.size() - (members.empty() ? 0 : 1)) / 2;

    using Key = std::pair<std::size_t, std::size_t>;
    Rng rng(seed);
    const auto self_pairs = draw_distinct<Key>(
        capacity, counts.selfmorph, rng,
        [&] {
            std::vector<Key> all;
            all.reserve(capacity);
            for (const auto& members : by_identity)
                for (std::size_t x = 0; x < members.size(); ++x)
                    for (std::size_t y = x + 1; y < members.size(); ++y) all.emplace_back(members[x], members[y]);
            return all;
        },
        [&] {
            for (;;) {
                const std::size_t i = rng.below(bona_fides.size());
                const auto& members = by_identity[static_cast<std::size_t>(single_identity(bona_fides[i]))];
                if (members.size() < 2) continue;
                const std::size_t j = members[rng.below(members.size())];
                if (j == i) continue;
                return Key{std::min(i, j), std::max(i, j)};
            }
        });

    std::vector<Sample> selfmorphs;
    selfmorphs.reserve(self_pairs.size());
    for (const auto& [i, j] : self_pairs) selfmorphs.push_back(make_selfmorph(bona_fides[i], bona_fides[j]));

    // Even interleave: item k of a pool of size n sits at (k + 0.5) / n.
    const std::vector<Sample>* pools[3] = {&bf, &morphs, &selfmorphs};
    struct Slot {
        std::size_t pool, index;
    };
    std::vector<Slot> slots;
    for (std::size_t p = 0; p < 3; ++p)
        for (std::size_t k = 0; k < pools[p]->size(); ++k) slots.push_back({p, k});
    std::stable_sort(slots.begin(), slots.end(), [&](const Slot& x, const Slot& y) {
        const auto lhs = (2 * x.index + 1) * pools[y.pool]->size();
        const auto rhs = (2 * y.index + 1) * pools[x.pool]->size();
        return lhs != rhs ? lhs < rhs : x.pool < y.pool;
    });

    std::vector<Sample> out;
    out.reserve(slots.size());
    for (const Slot& s : slots) out.push_back((*pools[s.pool])[s.index]);
    return out;
}

HoldoutSplit holdout_split(std::span<const Sample> bona_fides, std::size_t classes, double fraction) {
    if (!(fraction >= 0.0 && fraction < 1.0)) throw ConfigError("holdout fraction must lie in [0, 1)");
    std::vector<std::size_t> per_class(classes, 0);
    for (const Sample& s : bona_fides) {
        const int id = single_identity(s);
        if (id < 0 || static_cast<std::size_t>(id) >= classes) throw IndexError("identity outside class range");
        ++per_class[static_cast<std::size_t>(id)];
    }
    std::vector<std::size_t> keep(classes);
    for (std::size_t c = 0; c < classes; ++c) {
        const auto held = static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(per_class[c])));
        keep[c] = per_class[c] - std::min(held, per_class[c]);
    }
    HoldoutSplit out;
    std::vector<std::size_t> seen(classes, 0);
    for (const Sample& s : bona_fides) {
        const auto c = static_cast<std::size_t>(s.source_ids.front());
        (seen[c]++ < keep[c] ? out.train : out.holdout).push_back(s);
    }
    return out;
}

}  // namespace morphguard
