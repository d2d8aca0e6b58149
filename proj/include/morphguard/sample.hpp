#pragma once

#include <vector>

#include "morphguard/linalg.hpp"
#include "morphguard/loss.hpp"

namespace morphguard {

/// One training or evaluation input. `source_ids` holds the identity of a
/// bona fide / selfmorph, or the (subset-1, subset-2) parents of a morph.
struct Sample {
    Vec input;
    LabelPair labels;
    std::vector<int> source_ids;

    bool operator==(const Sample&) const = default;
};

}  // namespace morphguard
