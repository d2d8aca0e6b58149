#include "morphguard/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "morphguard/error.hpp"

namespace morphguard {

namespace {

constexpr double kUnitTolerance = 1e-9;

void check_scores(std::span<const double> scores, const char* what) {
    for (double s : scores)
        if (!std::isfinite(s) || s < -1.0 || s > 1.0)
            throw NumericInputError(std::string(what) + " score outside [-1, 1]");
}

void check_set(const VerificationSet& set) {
    if (set.genuine.empty() || set.impostor.empty()) throw ConfigError("verification set needs genuine and impostor scores");
    check_scores(set.genuine, "genuine");
    check_scores(set.impostor, "impostor");
}

Vec sorted(std::span<const double> v) {
    Vec out(v.begin(), v.end());
    std::sort(out.begin(), out.end());
    return out;
}

// Number of sorted values <= tau.
std::size_t count_at_most(const Vec& sorted_values, double tau) {
    return static_cast<std::size_t>(std::upper_bound(sorted_values.begin(), sorted_values.end(), tau) -
                                    sorted_values.begin());
}

double rate(std::size_t count, std::size_t total) { return static_cast<double>(count) / static_cast<double>(total); }

Vec trial_minima(std::span<const MorphTrial> trials) {
    if (trials.empty()) throw ConfigError("no morph trials");
    Vec mins;
    mins.reserve(trials.size());
    for (const MorphTrial& t : trials) {
        if (t.subject_scores.size() < 2)
            throw ProtocolError("morph trial '" + t.morph_id + "' has fewer than two subject scores");
        check_scores(t.subject_scores, "morph");
        mins.push_back(*std::min_element(t.subject_scores.begin(), t.subject_scores.end()));
    }
    std::sort(mins.begin(), mins.end());
    return mins;
}

Vec distinct_with_sentinels(Vec values) {
    values.push_back(-1.0);
    values.push_back(1.0);
    std::sort(values.begin(), values.end());
    values.erase(std::unique(values.begin(), values.end()), values.end());
    return values;
}

}  // namespace

double cosine_similarity(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) throw ProtocolError("cosine similarity of vectors with different dimensions");
    for (auto v : {a, b}) {
        const double n = norm2(v);
        if (!std::isfinite(n) || std::fabs(n - 1.0) > kUnitTolerance)
            throw NumericInputError("cosine similarity expects unit vectors");
    }
    return std::clamp(dot(a, b), -1.0, 1.0);
}

double fnmr_at(const VerificationSet& set, double threshold) {
    check_set(set);
    return rate(count_at_most(sorted(set.genuine), threshold), set.genuine.size());
}

double fmr_at(const VerificationSet& set, double threshold) {
    check_set(set);
    const std::size_t n = set.impostor.size();
    return rate(n - count_at_most(sorted(set.impostor), threshold), n);
}

VerificationCurves fnmr_fmr_curves(const VerificationSet& set) {
    check_set(set);
    const Vec gen = sorted(set.genuine);
    const Vec imp = sorted(set.impostor);
    Vec all = gen;
    all.insert(all.end(), imp.begin(), imp.end());
    const Vec thresholds = distinct_with_sentinels(std::move(all));

    VerificationCurves out;
    out.fnmr.thresholds = thresholds;
    out.fmr.thresholds = thresholds;
    out.fnmr.values.reserve(thresholds.size());
    out.fmr.values.reserve(thresholds.size());
    for (double t : thresholds) {
        out.fnmr.values.push_back(rate(count_at_most(gen, t), gen.size()));
        out.fmr.values.push_back(rate(imp.size() - count_at_most(imp, t), imp.size()));
    }
    return out;
}

OperatingPoint threshold_at(const ThresholdCurve& curve, double target, Direction direction) {
    if (!(target >= 0.0 && target <= 1.0)) throw ConfigError("rate target must lie in [0, 1]");
    if (curve.thresholds.empty() || curve.thresholds.size() != curve.values.size())
        throw ConfigError("malformed threshold curve");
    for (std::size_t i = 1; i < curve.values.size(); ++i) {
        const bool ordered = direction == Direction::FromBelow ? curve.values[i] >= curve.values[i - 1]
                                                               : curve.values[i] <= curve.values[i - 1];
        if (!ordered || !(curve.thresholds[i] > curve.thresholds[i - 1]))
            throw ConfigError("curve is not monotone in the stated direction");
    }

    // The feasible thresholds {value <= target} form a prefix of a rising curve
    // and a suffix of a falling one; take the far edge of that set.
    bool found = false;
    OperatingPoint best;
    for (std::size_t i = 0; i < curve.values.size(); ++i) {
        if (!(curve.values[i] <= target)) continue;
        if (!found || direction == Direction::FromBelow) best = {curve.thresholds[i], curve.values[i]};
        found = true;
    }
    if (!found) {
        const double lowest = *std::min_element(curve.values.begin(), curve.values.end());
        throw UnattainableOperatingPointError(
            "no threshold reaches rate " + std::to_string(target) + "; best achievable is " + std::to_string(lowest),
            lowest);
    }
    return best;
}

double mmpmr(std::span<const MorphTrial> trials, double tau) {
    const Vec mins = trial_minima(trials);
    return rate(mins.size() - count_at_most(mins, tau), mins.size());
}

ThresholdCurve mmpmr_curve(std::span<const MorphTrial> trials, std::span<const double> thresholds) {
    if (!std::is_sorted(thresholds.begin(), thresholds.end())) throw ConfigError("thresholds must be sorted");
    const Vec mins = trial_minima(trials);
    ThresholdCurve out;
    out.thresholds.assign(thresholds.begin(), thresholds.end());
    out.values.reserve(thresholds.size());
    for (double t : thresholds) out.values.push_back(rate(mins.size() - count_at_most(mins, t), mins.size()));
    return out;
}

double rmmr(double mmpmr_value, double fnmr_value) {
    if (!(mmpmr_value >= 0.0 && mmpmr_value <= 1.0) || !(fnmr_value >= 0.0 && fnmr_value <= 1.0))
        throw NumericInputError("rates must lie in [0, 1]");
    return mmpmr_value + fnmr_value;
}

Vec candidate_thresholds(std::span<const MorphTrial> trials, const VerificationSet& set) {
    Vec all(set.genuine.begin(), set.genuine.end());
    all.insert(all.end(), set.impostor.begin(), set.impostor.end());
    for (const MorphTrial& t : trials) all.insert(all.end(), t.subject_scores.begin(), t.subject_scores.end());
    return distinct_with_sentinels(std::move(all));
}

ThresholdCurve rmmr_curve(std::span<const MorphTrial> trials, const VerificationSet& set) {
    check_set(set);
    const Vec mins = trial_minima(trials);
    const Vec gen = sorted(set.genuine);
    ThresholdCurve out;
    out.thresholds = candidate_thresholds(trials, set);
    out.values.reserve(out.thresholds.size());
    for (double t : out.thresholds) {
        const double m = rate(mins.size() - count_at_most(mins, t), mins.size());
        const double f = rate(count_at_most(gen, t), gen.size());
        out.values.push_back(rmmr(m, f));
    }
    return out;
}

RmmrMinimum min_rmmr(std::span<const MorphTrial> trials, const VerificationSet& set) {
    const ThresholdCurve curve = rmmr_curve(trials, set);
    RmmrMinimum best{curve.thresholds[0], curve.values[0]};
    for (std::size_t i = 1; i < curve.values.size(); ++i)
        if (curve.values[i] < best.value) best = {curve.thresholds[i], curve.values[i]};
    return best;
}

std::vector<MmpmrAtFnmr> mmpmr_at_fnmr(std::span<const MorphTrial> trials, const VerificationSet& set,
                                       std::span<const double> fnmr_targets) {
    check_set(set);
    // FNMR over every candidate score, so the chosen threshold can sit on a morph score.
    const Vec gen = sorted(set.genuine);
    ThresholdCurve fnmr;
    fnmr.thresholds = candidate_thresholds(trials, set);
    for (double t : fnmr.thresholds) fnmr.values.push_back(rate(count_at_most(gen, t), gen.size()));
    std::vector<MmpmrAtFnmr> out;
    out.reserve(fnmr_targets.size());
    for (double target : fnmr_targets) {
        OperatingPoint op;
        try {
            op = threshold_at(fnmr, target, Direction::FromBelow);
        } catch (const UnattainableOperatingPointError& e) {
            throw UnattainableOperatingPointError(std::string("MMPMR@FNMR=") + std::to_string(target) + ": " + e.what(),
                                                  e.closest);
        }
        out.push_back({target, op.achieved, op.threshold, mmpmr(trials, op.threshold)});
    }
    return out;
}

std::vector<FnmrAtFmr> fnmr_at_fmr(const VerificationSet& set, std::span<const double> fmr_targets) {
    const VerificationCurves curves = fnmr_fmr_curves(set);
    std::vector<FnmrAtFmr> out;
    out.reserve(fmr_targets.size());
    for (double target : fmr_targets) {
        const OperatingPoint op = threshold_at(curves.fmr, target, Direction::FromAbove);
        out.push_back({target, op.achieved, op.threshold, fnmr_at(set, op.threshold)});
    }
    return out;
}

}  // namespace morphguard
