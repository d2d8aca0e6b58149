#include "morphguard/featviz.hpp"

#include <cmath>
#include <numbers>

#include "morphguard/error.hpp"

namespace morphguard {

namespace {

constexpr double kMinAnchorDistance = 1e-12;
constexpr double kMinEigenvalue = 1e-12;

double wrap_angle(double a) {
    constexpr double pi = std::numbers::pi;
    while (a <= -pi) a += 2.0 * pi;
    while (a > pi) a -= 2.0 * pi;
    return a;
}

}  // namespace

Point2 project_2d(std::span<const double> feature) {
    if (feature.size() < 2 || feature.size() % 2 != 0)
        throw ConfigError("projection needs an even feature dimension >= 2");
    double even = 0.0, odd = 0.0;
    for (std::size_t i = 0; i < feature.size(); i += 2) {
        even += feature[i];
        odd += feature[i + 1];
    }
    const double half = static_cast<double>(feature.size() / 2);
    return {even / half, odd / half};
}

Point2 RigidTransform::apply(Point2 p) const {
    const double c = std::cos(angle), s = std::sin(angle);
    return {scale * (c * p.x - s * p.y) + translation.x, scale * (s * p.x + c * p.y) + translation.y};
}

RigidTransform fit_rigid(Point2 p1, Point2 p2, AlignMode mode) {
    const double dx = p2.x - p1.x, dy = p2.y - p1.y;
    const double dist = std::hypot(dx, dy);
    if (!(dist > kMinAnchorDistance)) throw DegenerateAnchorError("alignment anchors coincide");

    RigidTransform t;
    t.angle = wrap_angle(std::atan2(1.0, 1.0) - std::atan2(dy, dx));
    t.scale = mode == AlignMode::Similarity ? std::numbers::sqrt2 / dist : 1.0;
    const Point2 mid{0.5 * (p1.x + p2.x), 0.5 * (p1.y + p2.y)};
    const Point2 moved = RigidTransform{t.angle, {0.0, 0.0}, t.scale}.apply(mid);
    t.translation = {-moved.x, -moved.y};
    return t;
}

AlignedTriplet align_triplet(const Triplet& t, AlignMode mode) {
    if (t.bona_a.size() != t.bona_b.size() || t.bona_a.size() != t.morph.size())
        throw ProtocolError("triplet members differ in dimension");
    const Point2 a = project_2d(t.bona_a);
    const Point2 b = project_2d(t.bona_b);
    const Point2 m = project_2d(t.morph);
    const RigidTransform tf = fit_rigid(a, b, mode);
    return {tf.apply(a), tf.apply(b), tf.apply(m)};
}

bool Ellipse::contains(Point2 p) const {
    const double c = std::cos(orientation), s = std::sin(orientation);
    const double dx = p.x - center.x, dy = p.y - center.y;
    const double u = (c * dx + s * dy) / (0.5 * width);
    const double v = (-s * dx + c * dy) / (0.5 * height);
    return u * u + v * v <= 1.0;
}

double chi2_2dof_quantile(double level) {
    if (!(level > 0.0 && level < 1.0)) throw ConfigError("confidence level must lie in (0, 1)");
    return -2.0 * std::log1p(-level);
}

Ellipse confidence_ellipse(std::span<const Point2> points, double level) {
    const double q = chi2_2dof_quantile(level);
    if (points.size() < 3) throw ConfigError("confidence ellipse needs at least three points");

    const double n = static_cast<double>(points.size());
    Point2 mean;
    for (const Point2& p : points) {
        mean.x += p.x;
        mean.y += p.y;
    }
    mean.x /= n;
    mean.y /= n;
    double sxx = 0.0, syy = 0.0, sxy = 0.0;
    for (const Point2& p : points) {
        const double dx = p.x - mean.x, dy = p.y - mean.y;
        sxx += dx * dx;
        syy += dy * dy;
        sxy += dx * dy;
    }
    sxx /= n - 1.0;
    syy /= n - 1.0;
    sxy /= n - 1.0;

    const double half_trace = 0.5 * (sxx + syy);
    const double radius = std::hypot(0.5 * (sxx - syy), sxy);
    const double major = half_trace + radius;
    const double minor = half_trace - radius;
    if (!(minor >= kMinEigenvalue)) throw DegenerateCovarianceError("point cloud covariance is degenerate");

    Ellipse e;
    e.center = mean;
    e.width = 2.0 * std::sqrt(q * major);
    e.height = 2.0 * std::sqrt(q * minor);
    e.size = 0.5 * (e.width + e.height);
    double angle = 0.5 * std::atan2(2.0 * sxy, sxx - syy);
    if (angle <= -std::numbers::pi / 2.0) angle += std::numbers::pi;
    e.orientation = angle;
    return e;
}

MorphSpread morph_spread(std::span<const Triplet> feature_triplets, double level, AlignMode mode) {
    if (feature_triplets.size() < 3) throw ConfigError("morph spread needs at least three triplets");
    MorphSpread out;
    out.aligned.reserve(feature_triplets.size());
    std::vector<Point2> cloud;
    cloud.reserve(feature_triplets.size());
    for (const Triplet& t : feature_triplets) {
        out.aligned.push_back(align_triplet(t, mode));
        cloud.push_back(out.aligned.back().morph);
    }
    out.ellipse = confidence_ellipse(cloud, level);
    out.size = out.ellipse.size;
    return out;
}

MorphSpread morph_spread(std::span<const Triplet> input_triplets, const DualHeadModel& model, double level,
                         AlignMode mode) {
    std::vector<Triplet> features;
    features.reserve(input_triplets.size());
    for (const Triplet& t : input_triplets)
        features.push_back({embed(model, t.bona_a), embed(model, t.bona_b), embed(model, t.morph)});
    return morph_spread(features, level, mode);
}

}  // namespace morphguard
