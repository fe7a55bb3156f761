#pragma once

#include "limitshape/polygon.hpp"

#include <functional>
#include <utility>
#include <vector>

namespace limitshape {

// ---------------------------------------------------------------------------
// BoundaryData
// ---------------------------------------------------------------------------

/// Piecewise-linear Dirichlet data on a closed polygonal boundary.
struct BoundaryData {
    std::vector<Vec2> polyline;  // closed: the last vertex repeats the first
    std::vector<double> values;
    double sample_density = 0.0;  // arclength step; 0 picks perimeter / 400

    static BoundaryData from_function(std::vector<Vec2> polyline, const std::function<double(const Vec2&)>& f,
                                      double sample_density = 0.0);
    /// φ(y) = p.y + c
    static BoundaryData linear(std::vector<Vec2> polyline, const Vec2& p, double c = 0.0);

    /// Throws MalformedBoundaryError for short, mismatched or self-intersecting input.
    void validate() const;
    [[nodiscard]] double perimeter() const;
    [[nodiscard]] double step() const;
    /// φ at parameter t in [0,1] of side i.
    [[nodiscard]] double value_on_side(std::size_t i, double t) const;
    /// φ at a point on the boundary (nearest side).
    [[nodiscard]] double value_at(const Vec2& y) const;
    /// Boundary points at spacing <= step(), including every vertex.
    [[nodiscard]] std::vector<std::pair<Vec2, double>> samples() const;
};

struct Admissibility {
    bool valid = true;
    Vec2 y1 = Vec2::Zero();
    Vec2 y2 = Vec2::Zero();
    /// max over checked pairs of φ(y1) - φ(y2) - D(y2 -> y1); positive means violated.
    double slack = 0.0;
};

// ---------------------------------------------------------------------------
// Obstacles
// ---------------------------------------------------------------------------

/// The minimal and maximal N-Lipschitz extensions of boundary data.
///
///   upper(x) = inf_y φ(y) + D(y -> x),   lower(x) = sup_y φ(y) - D(x -> y)
///
/// where D(a -> b) is the infimum of Σ support(N, step) over polygonal paths
/// from a to b inside the closed domain. On a convex domain D(a -> b) =
/// support(N, b - a) and the infimum over each side is taken exactly at the
/// kinks of the support function. On a nonconvex domain shortest paths bend
/// only at reflex vertices, so D comes from a visibility graph on them and
/// y runs over the boundary samples.
class Obstacles {
public:
    /// Throws InadmissibleError when check() fails.
    Obstacles(BoundaryData data, GradientPolygon N);

    [[nodiscard]] const BoundaryData& data() const noexcept { return data_; }
    [[nodiscard]] const GradientPolygon& polygon() const noexcept { return N_; }
    [[nodiscard]] bool convex_domain() const noexcept { return convex_; }

    [[nodiscard]] double upper(const Vec2& x) const;
    [[nodiscard]] double lower(const Vec2& x) const;
    [[nodiscard]] std::pair<double, double> pair(const Vec2& x) const { return {lower(x), upper(x)}; }
    /// Path-infimum D(a -> b) of support(N, .) inside the domain.
    [[nodiscard]] double distance(const Vec2& a, const Vec2& b) const;

    /// Pairwise admissibility over boundary samples (exact over y2 on convex domains).
    [[nodiscard]] Admissibility check() const;

private:
    Obstacles(BoundaryData data, GradientPolygon N, bool skip_check);
    friend Admissibility check_admissible(const BoundaryData&, const GradientPolygon&);

    // min_y φ(y) + D(y -> x) and its argmin
    [[nodiscard]] std::pair<double, Vec2> upper_with_arg(const Vec2& x) const;
    [[nodiscard]] bool visible(const Vec2& a, const Vec2& b) const;

    BoundaryData data_;
    GradientPolygon N_;
    bool convex_ = true;
    std::vector<Vec2> outline_;  // polyline without straight-through vertices
    std::vector<std::pair<Vec2, double>> samples_;
    std::vector<Vec2> reflex_;
    std::vector<std::vector<double>> graph_;  // all-pairs D between reflex vertices
    std::vector<double> up_reflex_;           // upper at reflex vertices
    std::vector<double> low_reflex_;          // lower at reflex vertices
};

/// Throws MalformedBoundaryError for malformed data.
[[nodiscard]] Admissibility check_admissible(const BoundaryData& data, const GradientPolygon& N);

/// Throws InadmissibleError when the data is not admissible.
[[nodiscard]] std::pair<double, double> obstacle_pair(const BoundaryData& data, const GradientPolygon& N,
                                                      const Vec2& x);

}  // namespace limitshape
