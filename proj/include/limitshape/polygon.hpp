#pragma once

#include "limitshape/core.hpp"

#include <span>
#include <vector>

namespace limitshape {

// ---------------------------------------------------------------------------
// GradientPolygon
// ---------------------------------------------------------------------------

/// The closed convex polygon N that admissible gradients live in.
///
/// Vertices are stored counterclockwise; a clockwise input is reversed at
/// construction (with a note on std::cerr). Side i is [p_i, p_{i+1}] with
/// outward unit normal n_i and offset c_i, so that N = {q : n_i.q <= c_i}.
class GradientPolygon {
public:
    explicit GradientPolygon(std::vector<Vec2> vertices);
    GradientPolygon(std::vector<Vec2> vertices, const Vec2& interior_point);

    static GradientPolygon square(double half_width = 1.0);
    /// Slope triangle of the lozenge height convention (see docs/conventions.md).
    static GradientPolygon lozenge_triangle();

    [[nodiscard]] std::size_t size() const noexcept { return vertices_.size(); }
    [[nodiscard]] std::span<const Vec2> vertices() const noexcept { return vertices_; }
    [[nodiscard]] const Vec2& vertex(std::size_t i) const { return vertices_[i % vertices_.size()]; }
    [[nodiscard]] const Vec2& outward_normal(std::size_t i) const { return normals_[i]; }
    [[nodiscard]] Vec2 inward_normal(std::size_t i) const { return -normals_[i]; }
    [[nodiscard]] double offset(std::size_t i) const { return offsets_[i]; }
    [[nodiscard]] const Vec2& interior_point() const noexcept { return z0_; }
    [[nodiscard]] double interior_depth() const noexcept { return depth_; }
    [[nodiscard]] double diameter() const noexcept { return diameter_; }

    /// max_i p_i.d
    [[nodiscard]] double support(const Vec2& d) const;
    /// max_i (n_i.p - c_i); <= 0 iff p is in the closed polygon.
    [[nodiscard]] double gauge_excess(const Vec2& p) const;
    /// Signed side excesses n_i.p - c_i.
    [[nodiscard]] std::vector<double> side_excesses(const Vec2& p) const;
    [[nodiscard]] bool contains(const Vec2& p, double tol = kGeomTol) const {
        return gauge_excess(p) <= tol;
    }
    /// Euclidean nearest point of the closed polygon.
    [[nodiscard]] Vec2 project(const Vec2& p) const;
    /// Distance to the boundary for points inside (0 outside).
    [[nodiscard]] double boundary_distance(const Vec2& p) const;
    /// Minkowski gauge of p - z0 relative to N - z0; 1 on the boundary.
    [[nodiscard]] double radial_gauge(const Vec2& p) const;

    /// Continuous map to the unit sphere collapsing the boundary to (0,0,-1),
    /// injective on the interior, with H(z0) = (0,0,1).
    [[nodiscard]] Vec3 h_map(const Vec2& p) const;
    /// Lipschitz constant of h_map on the closed polygon.
    [[nodiscard]] double h_lipschitz() const;

    /// Direction w with w.(p - p_i) > 0 for every p != p_i in the polygon.
    [[nodiscard]] Vec2 vertex_cone_direction(std::size_t i) const;

    /// Dilation about the interior point by `factor`.
    [[nodiscard]] GradientPolygon scaled(double factor) const;

private:
    void build();

    std::vector<Vec2> vertices_;
    std::vector<Vec2> normals_;
    std::vector<double> offsets_;
    Vec2 z0_ = Vec2::Zero();
    double depth_ = 0.0;
    double diameter_ = 0.0;
    double min_side_depth_ = 0.0;
};

// ---------------------------------------------------------------------------
// Planar polygon helpers (for the physical domain)
// ---------------------------------------------------------------------------

[[nodiscard]] double signed_area(std::span<const Vec2> loop);
[[nodiscard]] bool point_in_polygon(std::span<const Vec2> loop, const Vec2& p, double tol = 1e-12);
[[nodiscard]] double distance_to_loop(std::span<const Vec2> loop, const Vec2& p);
[[nodiscard]] Vec2 closest_point_on_segment(const Vec2& a, const Vec2& b, const Vec2& p);
/// True when the open segments cross at a single interior point.
[[nodiscard]] bool segments_cross(const Vec2& a, const Vec2& b, const Vec2& c, const Vec2& d);
[[nodiscard]] bool segments_intersect(const Vec2& a, const Vec2& b, const Vec2& c, const Vec2& d);
[[nodiscard]] bool is_simple_loop(std::span<const Vec2> loop);
[[nodiscard]] bool is_convex_loop(std::span<const Vec2> loop);
/// Closed segment [a,b] lies in the closed polygon.
[[nodiscard]] bool segment_inside(std::span<const Vec2> loop, const Vec2& a, const Vec2& b);

}  // namespace limitshape
