#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "morphguard/linalg.hpp"

namespace morphguard {

/// Scores of mated (genuine) and non-mated (impostor) comparisons, in [-1, 1].
struct VerificationSet {
    Vec genuine;
    Vec impostor;
};

/// Similarity of one morph against each of its contributing subjects.
struct MorphTrial {
    std::string morph_id;
    Vec subject_scores;

    bool operator==(const MorphTrial&) const = default;
};

struct ThresholdCurve {
    Vec thresholds;  // strictly increasing
    Vec values;      // rates in [0, 1]

    bool operator==(const ThresholdCurve&) const = default;
};

/// Clamped dot product of two unit vectors.
double cosine_similarity(std::span<const double> a, std::span<const double> b);

/// Decision rule everywhere: a comparison matches iff score > threshold.
double fnmr_at(const VerificationSet& set, double threshold);
double fmr_at(const VerificationSet& set, double threshold);

struct VerificationCurves {
    ThresholdCurve fnmr;
    ThresholdCurve fmr;
};

/// Both curves over the distinct scores of the set plus the sentinels -1, +1.
VerificationCurves fnmr_fmr_curves(const VerificationSet& set);

/// FNMR curves rise with the threshold (FromBelow), FMR curves fall (FromAbove).
enum class Direction { FromBelow, FromAbove };

struct OperatingPoint {
    double threshold = 0.0;
    double achieved = 0.0;
};

/// Operating point for a rate target, no interpolation. On a rising curve
/// (FromBelow) this is the largest threshold whose value is <= target, on a
/// falling curve (FromAbove) the smallest one. Either way the other error
/// rate is as low as the constraint allows. Throws
/// UnattainableOperatingPointError (carrying the lowest value on the curve)
/// when every value exceeds the target.
OperatingPoint threshold_at(const ThresholdCurve& curve, double target, Direction direction);

/// Fraction of trials whose minimum subject score is strictly above tau.
double mmpmr(std::span<const MorphTrial> trials, double tau);

/// Pointwise mmpmr over sorted thresholds.
ThresholdCurve mmpmr_curve(std::span<const MorphTrial> trials, std::span<const double> thresholds);

/// mmpmr + fnmr, which equals 1 + (mmpmr - tmr) with tmr = 1 - fnmr.
double rmmr(double mmpmr_value, double fnmr_value);

struct RmmrMinimum {
    double threshold = 0.0;
    double value = 0.0;
};

/// Every distinct score of the trials and the verification set, plus -1 and +1.
Vec candidate_thresholds(std::span<const MorphTrial> trials, const VerificationSet& set);

/// RMMR curve over candidate_thresholds.
ThresholdCurve rmmr_curve(std::span<const MorphTrial> trials, const VerificationSet& set);

/// Minimum of mmpmr + fnmr over the candidate thresholds; ties go to the
/// smallest threshold.
RmmrMinimum min_rmmr(std::span<const MorphTrial> trials, const VerificationSet& set);

struct MmpmrAtFnmr {
    double target = 0.0;
    double achieved_fnmr = 0.0;
    double threshold = 0.0;
    double mmpmr = 0.0;
};

/// Thresholds are searched over candidate_thresholds, not just the
/// verification scores.
std::vector<MmpmrAtFnmr> mmpmr_at_fnmr(std::span<const MorphTrial> trials, const VerificationSet& set,
                                       std::span<const double> fnmr_targets);

struct FnmrAtFmr {
    double target = 0.0;
    double achieved_fmr = 0.0;
    double threshold = 0.0;
    double fnmr = 0.0;
};

std::vector<FnmrAtFmr> fnmr_at_fmr(const VerificationSet& set, std::span<const double> fmr_targets);

}  // namespace morphguard
