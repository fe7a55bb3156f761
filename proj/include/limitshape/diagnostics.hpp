#pragma once

#include "limitshape/mesh.hpp"
#include "limitshape/polygon.hpp"

#include <functional>
#include <utility>
#include <vector>

namespace limitshape {

// ---------------------------------------------------------------------------
// Energies
// ---------------------------------------------------------------------------

struct Disk {
    Vec2 center = Vec2::Zero();
    double radius = 0.0;
};

struct CaccioppoliParams {
    Vec2 direction = Vec2(1, 0);  // e, normalized on use
    double c0 = 0.0;
    double c1 = 1.0;
    Disk window;
};

/// Smoothstep cutoff: 0 below c0, 1 above c1, 3t^2 - 2t^3 in between.
[[nodiscard]] double cutoff(double v, double c0, double c1);
/// sup |G'| = 1.5 / (c1 - c0)
[[nodiscard]] inline double cutoff_slope(double c0, double c1) { return 1.5 / (c1 - c0); }

/// Per-triangle gradients averaged to nodes with area weights.
[[nodiscard]] std::vector<Vec2> recovered_gradient(const ScalarField& u);

/// ∫_window |∇ G(u_e)|^2 with u_e the recovered directional derivative and G
/// applied nodewise. Triangles count when their centroid is in the window.
/// Throws WindowOutsideDomainError unless the closed window lies in Ω.
[[nodiscard]] double caccioppoli_energy(const ScalarField& u, const CaccioppoliParams& params);

/// ∫_window |∇u_e|^2, the quantity that bounds the Caccioppoli energy through
/// |∇G(v)| <= sup|G'| |∇v| on meshes with orthogonal legs.
[[nodiscard]] double directional_dirichlet(const ScalarField& u, const Vec2& direction, const Disk& window);

/// Σ area |D^2 u|_F^2 over window triangles whose gradient satisfies the
/// predicate; D^2 u is the P1 gradient of the recovered gradient field.
[[nodiscard]] double hessian_energy(const ScalarField& u, const std::function<bool(const Vec2&)>& gradient_region,
                                    const Disk& window);

// ---------------------------------------------------------------------------
// Moduli of continuity
// ---------------------------------------------------------------------------

using Curve = std::vector<std::pair<double, double>>;

/// ω(δ) = max over sample centres x of diam{∇u_T : centroid_T ∈ B_δ(x)}.
/// Centres are triangle centroids at least max(radii) from ∂Ω, thinned to at
/// most `max_centres`. Throws ConfigError for non-increasing radii and
/// WindowOutsideDomainError when no centre qualifies.
[[nodiscard]] Curve gradient_modulus(const ScalarField& u, const std::vector<double>& radii,
                                     std::size_t max_centres = 300);

/// The same construction applied to H(∇u_T).
[[nodiscard]] Curve h_continuity(const ScalarField& u, const GradientPolygon& N, const std::vector<double>& radii,
                                 std::size_t max_centres = 300);

// ---------------------------------------------------------------------------
// Facets
// ---------------------------------------------------------------------------

struct FacetReport {
    int vertex = 0;
    Vec2 slope = Vec2::Zero();
    Vec2 omega = Vec2::Zero();        // ω_i, pointing into N from p_i
    std::vector<int> triangles;        // one connected component
    /// Boundary chains inside Ω in the frame (s, t) = (x.ω⊥, x.ω), sorted by s.
    std::vector<Vec2> upper_chain;
    std::vector<Vec2> lower_chain;
    double upper_violation = 0.0;      // distance above the convex envelope
    double lower_violation = 0.0;      // distance below the concave envelope
    bool upper_convex = true;
    bool lower_concave = true;
};

/// Connected regions of triangles with |∇u - p_i| <= facet_tol, each with its
/// boundary split by the outward normal's sign against ω_i. Verdicts pass
/// when the violation is at most `geometric_tol` (0 picks 2h).
[[nodiscard]] std::vector<FacetReport> detect_facets(const ScalarField& u, const GradientPolygon& N, double facet_tol,
                                                     double geometric_tol = 0.0, std::size_t min_triangles = 1);

// ---------------------------------------------------------------------------
// Jump segments
// ---------------------------------------------------------------------------

struct JumpSegment {
    Vec2 point = Vec2::Zero();      // centroid of the chain
    Vec2 direction = Vec2::Zero();  // principal direction
    double s_min = 0.0, s_max = 0.0;
    std::size_t edges = 0;
    int side = -1;                  // matched side [p_i, p_{i+1}]
    double angle_deviation = 0.0;   // degrees from ν_side
    bool reach_start = false;       // end within 2h of ∂Ω
    bool reach_end = false;
    double affine_residual = 0.0;   // max |u - u(x0) - p_i.(x - x0)| over chain nodes
    bool compliant = false;
};

struct JumpReport {
    std::vector<std::pair<int, int>> jump_edges;
    std::vector<JumpSegment> segments;
    double angle_tolerance = 5.0;
    double residual_tolerance = 0.0;  // 4 h M
};

/// Clusters mesh edges whose adjacent gradients differ by more than jump_tol
/// (union-find over edges sharing a node with jump directions within
/// cluster_angle degrees), fits a segment per cluster and checks direction
/// against the side normals, boundary reach and affinity with slope p_i.
[[nodiscard]] JumpReport detect_jump_segments(const ScalarField& u, const GradientPolygon& N, double jump_tol,
                                              double angle_tolerance = 5.0, double cluster_angle = 15.0);

}  // namespace limitshape
