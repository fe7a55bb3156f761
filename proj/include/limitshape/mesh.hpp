#pragma once

#include "limitshape/core.hpp"

#include <array>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <vector>

namespace limitshape {

// ---------------------------------------------------------------------------
// TriMesh
// ---------------------------------------------------------------------------

struct Location {
    int triangle = -1;
    std::array<double, 3> bary{};
};

/// Conforming P1 triangulation of a polygonal domain.
///
/// Build by filling `nodes`, `triangles` and `outline` and calling finalize(),
/// which orients triangles counterclockwise, rejects degenerate ones, marks
/// boundary nodes (endpoints of edges owned by a single triangle) and
/// precomputes hat-function gradients.
class TriMesh {
public:
    std::vector<Vec2> nodes;
    std::vector<std::array<int, 3>> triangles;
    /// Counterclockwise boundary loop of the domain.
    std::vector<Vec2> outline;

    void finalize();

    [[nodiscard]] std::size_t node_count() const noexcept { return nodes.size(); }
    [[nodiscard]] std::size_t triangle_count() const noexcept { return triangles.size(); }
    [[nodiscard]] bool is_boundary(int node) const { return boundary_[node] != 0; }
    [[nodiscard]] std::span<const int> boundary_nodes() const noexcept { return boundary_list_; }
    [[nodiscard]] double area(int t) const { return area_[t]; }
    [[nodiscard]] double total_area() const noexcept { return total_area_; }
    /// Longest edge.
    [[nodiscard]] double mesh_size() const noexcept { return h_; }
    /// Gradient of the hat function of the k-th corner of triangle t.
    [[nodiscard]] const Vec2& hat_gradient(int t, int k) const { return hat_[3 * t + k]; }
    [[nodiscard]] Vec2 centroid(int t) const;
    /// Triangles touching each node.
    [[nodiscard]] const std::vector<std::vector<int>>& node_triangles() const noexcept { return star_; }

    [[nodiscard]] std::optional<Location> locate(const Vec2& x, double tol = 1e-10) const;
    /// Distance from x to the domain outline.
    [[nodiscard]] double boundary_distance(const Vec2& x) const;

private:
    std::vector<char> boundary_;
    std::vector<int> boundary_list_;
    std::vector<double> area_;
    std::vector<Vec2> hat_;
    std::vector<std::vector<int>> star_;
    double total_area_ = 0.0;
    double h_ = 0.0;

    // bucket grid for locate()
    Vec2 lo_ = Vec2::Zero();
    double cell_ = 1.0;
    int gx_ = 0, gy_ = 0;
    std::vector<std::vector<int>> buckets_;
};

/// [lo.x, hi.x] x [lo.y, hi.y] split into nx*ny cells, each cut by its
/// lower-left to upper-right diagonal.
[[nodiscard]] TriMesh rectangle_mesh(const Vec2& lo, const Vec2& hi, int nx, int ny);

/// Triangular-lattice coordinates (i, j) -> plane: i(1,0) + j(1/2, √3/2).
[[nodiscard]] inline Vec2 lattice_point(double i, double j) { return {i + 0.5 * j, 0.8660254037844386 * j}; }

/// Corners of the a x b x c lattice hexagon, counterclockwise, in lattice
/// coordinates: (a,0), (a-b,b), (-b,b), (-b,b-c), (0,-c), (a,-c).
[[nodiscard]] std::array<std::array<int, 2>, 6> hexagon_corners(int a, int b, int c);

/// The a x b x c hexagon scaled by 1/scale, meshed by the triangular lattice
/// of spacing 1/(refine*scale). With refine = 1 the nodes are the lattice
/// sites of the tiling sampler.
[[nodiscard]] TriMesh hexagon_mesh(int a, int b, int c, double scale, int refine);

/// Conforming Delaunay mesh of a simple polygon with target edge length h.
/// Throws MeshDegenerateError for a non-simple outline.
[[nodiscard]] TriMesh polygon_mesh(std::span<const Vec2> outline, double h);

/// Mesh from nodes and triangles alone; the outline is traced along the
/// edges owned by one triangle. Throws MeshDegenerateError when they do not
/// form a single loop.
[[nodiscard]] TriMesh mesh_from_triangles(std::vector<Vec2> nodes, std::vector<std::array<int, 3>> triangles);

/// Uniform red refinement (each triangle into four).
[[nodiscard]] TriMesh refine(const TriMesh& mesh);

// ---------------------------------------------------------------------------
// ScalarField
// ---------------------------------------------------------------------------

/// Continuous piecewise-linear function on a TriMesh.
class ScalarField {
public:
    ScalarField(std::shared_ptr<const TriMesh> mesh, Eigen::VectorXd values);
    static ScalarField interpolate(std::shared_ptr<const TriMesh> mesh, const std::function<double(const Vec2&)>& f);

    [[nodiscard]] const TriMesh& mesh() const noexcept { return *mesh_; }
    [[nodiscard]] const std::shared_ptr<const TriMesh>& mesh_ptr() const noexcept { return mesh_; }
    [[nodiscard]] const Eigen::VectorXd& values() const noexcept { return values_; }
    [[nodiscard]] Eigen::VectorXd& values() noexcept { return values_; }

    [[nodiscard]] Vec2 gradient(int t) const;
    /// Lipschitz bound M = max_t |∇u_t|.
    [[nodiscard]] double lipschitz() const;
    /// Throws OutsideDomainError when x is not in the mesh.
    [[nodiscard]] double value_at(const Vec2& x) const;

private:
    std::shared_ptr<const TriMesh> mesh_;
    Eigen::VectorXd values_;
};

}  // namespace limitshape
