#include "morphguard/loss.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <numbers>
#include <string>

#include "morphguard/error.hpp"

namespace morphguard {

namespace {

constexpr double kHalfPi = std::numbers::pi / 2.0;
constexpr double kCosTolerance = 1e-9;
constexpr double kUnitTolerance = 1e-9;
constexpr double kDegenerateRow = 1e-12;

// Smallest sine used in the chain factor, i.e. sin(acos(1 - 1e-9)).
const double kSinFloor = std::sqrt(1.0 - (1.0 - kCosTolerance) * (1.0 - kCosTolerance));

double checked_cosine(double c) {
    if (!std::isfinite(c) || std::fabs(c) > 1.0 + kCosTolerance)
        throw NumericInputError("cosine outside [-1, 1]: " + std::to_string(c));
    return std::clamp(c, -1.0, 1.0);
}

void check_margin(double m) {
    if (!std::isfinite(m) || m <= -kHalfPi || m >= kHalfPi)
        throw NumericInputError("margin outside (-pi/2, pi/2): " + std::to_string(m));
}

}  // namespace

void MarginConfig::validate() const {
    if (!(scale > 0.0) || !std::isfinite(scale))
        throw ConfigError("margin scale must be positive");
    if (!(m_bf >= 0.0 && m_bf < kHalfPi))
        throw ConfigError("bona fide margin must lie in [0, pi/2)");
    const double mm = morph_margin();
    if (!(mm > -kHalfPi && mm < kHalfPi))
        throw ConfigError("morph margin m_bf + m_mg must lie in (-pi/2, pi/2)");
}

const char* to_string(SampleKind kind) {
    switch (kind) {
        case SampleKind::BonaFide: return "bona_fide";
        case SampleKind::Morph: return "morph";
        case SampleKind::SelfMorph: return "selfmorph";
    }
    return "unknown";
}

SampleKind sample_kind_from_string(const char* name) {
    if (std::strcmp(name, "bona_fide") == 0) return SampleKind::BonaFide;
    if (std::strcmp(name, "morph") == 0) return SampleKind::Morph;
    if (std::strcmp(name, "selfmorph") == 0) return SampleKind::SelfMorph;
    throw ProtocolError(std::string("unknown sample kind: ") + name);
}

void LabelPair::validate(std::size_t classes) const {
    const auto in_range = [classes](int y) { return y >= 0 && static_cast<std::size_t>(y) < classes; };
    if (!in_range(y_dot) || !in_range(y_ddot))
        throw IndexError("label out of range [0, " + std::to_string(classes) + ")");
    if (kind == SampleKind::Morph && y_dot == y_ddot)
        throw ProtocolError("morph with identical head labels");
    if (kind != SampleKind::Morph && y_dot != y_ddot)
        throw ProtocolError(std::string(to_string(kind)) + " with differing head labels");
}

LossGrad softmax_ce(std::span<const double> logits, std::size_t target) {
    if (target >= logits.size())
        throw IndexError("softmax target " + std::to_string(target) + " out of range");
    for (double z : logits)
        if (!std::isfinite(z)) throw NumericInputError("non-finite logit");

    const auto top = static_cast<std::size_t>(std::max_element(logits.begin(), logits.end()) - logits.begin());
    const double max = logits[top];

    LossGrad out;
    out.grad.resize(logits.size());
    double others = 0.0;
    for (std::size_t j = 0; j < logits.size(); ++j) {
        out.grad[j] = std::exp(logits[j] - max);
        if (j != top) others += out.grad[j];
    }
    // log-sum-exp relative to the max, accurate when one logit dominates.
    const double lse = std::log1p(others);
    const double total = 1.0 + others;
    for (double& p : out.grad) p /= total;
    // p_t - 1 written as minus the other classes' mass: no cancellation when p_t ~ 1.
    double rest = 0.0;
    for (std::size_t j = 0; j < out.grad.size(); ++j)
        if (j != target) rest += out.grad[j];
    out.grad[target] = -rest;
    out.loss = lse - (logits[target] - max);
    return out;
}

CosineLogits cosine_logits(std::span<const double> embedding, const Matrix& head) {
    if (embedding.size() < 2) throw ConfigError("embedding dimension must be at least 2");
    if (head.cols != embedding.size())
        throw ProtocolError("head width " + std::to_string(head.cols) + " does not match embedding dimension " +
                            std::to_string(embedding.size()));
    const double n = norm2(embedding);
    if (!std::isfinite(n) || std::fabs(n - 1.0) > kUnitTolerance)
        throw NumericInputError("embedding is not unit norm");

    CosineLogits out;
    out.values.resize(head.rows);
    for (std::size_t j = 0; j < head.rows; ++j) {
        const auto w = head.row(j);
        const double wn = norm2(w);
        if (!(wn >= kDegenerateRow)) throw DegenerateWeightError("head row " + std::to_string(j) + " has ~zero norm");
        out.values[j] = std::clamp(dot(embedding, w) / wn, -1.0, 1.0);
    }
    return out;
}

double margin_adjust(double cos_theta, double m) {
    const double c = checked_cosine(cos_theta);
    check_margin(m);
    const double angle = std::acos(c) + m;
    if (angle > std::numbers::pi) return -1.0;
    if (angle < 0.0) return 1.0;
    const double sin_theta = std::sqrt(1.0 - c * c);
    return std::clamp(c * std::cos(m) - sin_theta * std::sin(m), -1.0, 1.0);
}

double margin_adjust_derivative(double cos_theta, double m) {
    const double c = checked_cosine(cos_theta);
    check_margin(m);
    const double angle = std::acos(c) + m;
    if (angle > std::numbers::pi || angle < 0.0) return 0.0;
    const double sin_theta = std::max(std::sqrt(1.0 - c * c), kSinFloor);
    return std::cos(m) + std::sin(m) * c / sin_theta;
}

LossGrad margin_softmax_ce(const CosineLogits& cosines, std::size_t target, double s, double m) {
    const auto& c = cosines.values;
    if (target >= c.size()) throw IndexError("margin softmax target " + std::to_string(target) + " out of range");
    if (!(s > 0.0) || !std::isfinite(s)) throw NumericInputError("scale must be positive");

    Vec logits(c.size());
    for (std::size_t j = 0; j < c.size(); ++j) logits[j] = s * checked_cosine(c[j]);
    logits[target] = s * margin_adjust(c[target], m);

    LossGrad out = softmax_ce(logits, target);
    for (double& g : out.grad) g *= s;
    out.grad[target] *= margin_adjust_derivative(c[target], m);
    return out;
}

double sample_margin(SampleKind kind, const MarginConfig& config) {
    return kind == SampleKind::Morph ? config.morph_margin() : config.m_bf;
}

MorphGuardResult morphguard_loss(std::span<const MorphGuardItem> batch, const MarginConfig& config) {
    if (batch.empty()) throw EmptyBatchError("morphguard loss over an empty batch");
    config.validate();

    const double n = static_cast<double>(batch.size());
    MorphGuardResult out;
    out.grad_head1.reserve(batch.size());
    out.grad_head2.reserve(batch.size());
    double total = 0.0;
    for (const MorphGuardItem& item : batch) {
        if (item.head1 == nullptr || item.head2 == nullptr) throw ProtocolError("missing cosine logits");
        const std::size_t classes = item.head1->values.size();
        if (item.head2->values.size() != classes) throw ProtocolError("heads disagree on class count");
        item.labels.validate(classes);

        const double m = sample_margin(item.labels.kind, config);
        LossGrad first = margin_softmax_ce(*item.head1, static_cast<std::size_t>(item.labels.y_dot), config.scale, m);
        LossGrad second = margin_softmax_ce(*item.head2, static_cast<std::size_t>(item.labels.y_ddot), config.scale, m);
        total += first.loss + second.loss;
        for (double& g : first.grad) g /= n;
        for (double& g : second.grad) g /= n;
        out.grad_head1.push_back(std::move(first.grad));
        out.grad_head2.push_back(std::move(second.grad));
    }
    out.loss = total / n;
    return out;
}

}  // namespace morphguard
