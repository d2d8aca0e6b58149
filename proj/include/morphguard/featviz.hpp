#pragma once

#include <span>
#include <vector>

#include "morphguard/encoder.hpp"
#include "morphguard/linalg.hpp"

namespace morphguard {

struct Point2 {
    double x = 0.0;
    double y = 0.0;

    bool operator==(const Point2&) const = default;
};

/// (mean of even-index entries, mean of odd-index entries). Needs an even dimension.
Point2 project_2d(std::span<const double> feature);

enum class AlignMode {
    Rigid,       // rotation + translation
    Similarity,  // additionally scales the anchors onto (-0.5,-0.5), (0.5,0.5)
};

/// p -> scale * R(angle) p + translation.
struct RigidTransform {
    double angle = 0.0;
    Point2 translation;
    double scale = 1.0;

    Point2 apply(Point2 p) const;
};

/// Moves the anchor midpoint to the origin and turns p2 - p1 onto the (1, 1)
/// diagonal. In Rigid mode distances are preserved, so the anchors land on
/// (-0.5,-0.5) / (0.5,0.5) only when they are sqrt(2) apart.
RigidTransform fit_rigid(Point2 p1, Point2 p2, AlignMode mode = AlignMode::Rigid);

/// Features of two bona fide samples and their morph.
struct Triplet {
    Vec bona_a;
    Vec bona_b;
    Vec morph;
};

struct AlignedTriplet {
    Point2 bona_a;
    Point2 bona_b;
    Point2 morph;
};

AlignedTriplet align_triplet(const Triplet& t, AlignMode mode = AlignMode::Rigid);

struct Ellipse {
    Point2 center;
    double width = 0.0;        // major-axis extent
    double height = 0.0;       // minor-axis extent
    double orientation = 0.0;  // major-axis angle in (-pi/2, pi/2]
    double size = 0.0;         // (width + height) / 2

    bool contains(Point2 p) const;
};

/// -2 ln(1 - level): the chi-square quantile with two degrees of freedom.
double chi2_2dof_quantile(double level);

/// Covariance ellipse of a 2D cloud (unbiased covariance) scaled to `level`.
/// Throws DegenerateCovarianceError when the smaller eigenvalue is below 1e-12.
Ellipse confidence_ellipse(std::span<const Point2> points, double level = 0.9);

struct MorphSpread {
    std::vector<AlignedTriplet> aligned;
    Ellipse ellipse;
    double size = 0.0;
};

/// Ellipse over the aligned morph points of feature triplets.
MorphSpread morph_spread(std::span<const Triplet> feature_triplets, double level = 0.9,
                         AlignMode mode = AlignMode::Rigid);

/// Same, with triplets given as encoder inputs; each member is embedded first.
MorphSpread morph_spread(std::span<const Triplet> input_triplets, const DualHeadModel& model, double level = 0.9,
                         AlignMode mode = AlignMode::Rigid);

}  // namespace morphguard
