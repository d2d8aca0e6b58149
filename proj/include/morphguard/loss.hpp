#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "morphguard/linalg.hpp"

namespace morphguard {

/// Scale and margins of the dual-branch margin loss. Morph samples are trained
/// with margin m_bf + m_mg, everything else with m_bf.
struct MarginConfig {
    double scale = 64.0;
    double m_bf = 0.5;
    double m_mg = 0.0;

    double morph_margin() const { return m_bf + m_mg; }

    /// Throws ConfigError when s <= 0, m_bf outside [0, pi/2) or the morph
    /// margin outside (-pi/2, pi/2).
    void validate() const;

    bool operator==(const MarginConfig&) const = default;
};

enum class SampleKind { BonaFide, Morph, SelfMorph };

const char* to_string(SampleKind kind);
SampleKind sample_kind_from_string(const char* name);

/// Per-head targets. Bona fides and selfmorphs carry the same class on both
/// heads; a morph carries its subset-1 parent on head 1 and its subset-2
/// parent on head 2.
struct LabelPair {
    int y_dot = 0;
    int y_ddot = 0;
    SampleKind kind = SampleKind::BonaFide;

    /// Throws ProtocolError on a kind/label mismatch, IndexError when a label
    /// is outside [0, classes).
    void validate(std::size_t classes) const;

    bool operator==(const LabelPair&) const = default;
};

/// Cosines between one embedding and the normalized rows of a head.
struct CosineLogits {
    Vec values;
};

struct LossGrad {
    double loss = 0.0;
    Vec grad;
};

/// Cross entropy of softmax(logits) against `target`, with max subtraction.
/// grad = softmax(logits) - onehot(target).
LossGrad softmax_ce(std::span<const double> logits, std::size_t target);

/// values[j] = <embedding, row_j / |row_j|>, clamped to [-1, 1].
CosineLogits cosine_logits(std::span<const double> embedding, const Matrix& head);

/// cos(clamp(acos(c) + m, 0, pi)).
double margin_adjust(double cos_theta, double m);

/// d margin_adjust / d cos_theta. Zero where the angle sum is clamped; near
/// |cos_theta| = 1 the sine in the denominator is floored so the value stays
/// finite.
double margin_adjust_derivative(double cos_theta, double m);

/// Additive angular margin softmax over s * cosines with margin `m` on the
/// target angle. grad is with respect to the raw cosines.
LossGrad margin_softmax_ce(const CosineLogits& cosines, std::size_t target, double s, double m);

double sample_margin(SampleKind kind, const MarginConfig& config);

struct MorphGuardItem {
    const CosineLogits* head1 = nullptr;
    const CosineLogits* head2 = nullptr;
    LabelPair labels;
};

struct MorphGuardResult {
    double loss = 0.0;
    /// Per-sample cosine gradients for each head, already divided by the batch size.
    std::vector<Vec> grad_head1;
    std::vector<Vec> grad_head2;
};

/// Mean over the batch of the two per-head margin losses. Morphs use the morph
/// margin on both heads.
MorphGuardResult morphguard_loss(std::span<const MorphGuardItem> batch, const MarginConfig& config);

}  // namespace morphguard
