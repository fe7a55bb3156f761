#pragma once

#include "limitshape/mesh.hpp"
#include "limitshape/obstacles.hpp"
#include "limitshape/tension.hpp"

#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace limitshape {

// ---------------------------------------------------------------------------
// Discrete energy
// ---------------------------------------------------------------------------

struct EnergyEval {
    double energy = 0.0;
    /// d energy / d u_i; zero at boundary nodes.
    Eigen::VectorXd gradient;
};

/// Σ_T area(T) F_m(∇u_T), summed in triangle order.
[[nodiscard]] EnergyEval assemble_energy(const TriMesh& mesh, const PenalizedTension& model, const ScalarField& u);

/// Weak Euler-Lagrange residual Σ_T area(T) ∇F_m(∇u_T).∇φ_i at interior nodes (zero on the boundary).
[[nodiscard]] Eigen::VectorXd el_residual(const ScalarField& u, const PenalizedTension& model);

struct ConstraintViolation {
    double max_excess = 0.0;
    std::vector<int> offending_triangles;  // excess > 0
};

/// Largest gauge excess of triangle gradients over triangles whose centroid
/// is at least `boundary_layer` away from the domain outline.
[[nodiscard]] ConstraintViolation constraint_violation(const ScalarField& u, const GradientPolygon& N,
                                                       double boundary_layer = 0.0);

// ---------------------------------------------------------------------------
// solve
// ---------------------------------------------------------------------------

struct Tolerances {
    double kkt = 0.0;            // 0 picks 1e-8 * area(Ω)
    double constraint = 5e-2;
    double energy = 1e-9;
    double boundary_layer = 0.0;  // d_K; 0 picks 4h
    int max_newton = 200;
    bool early_stop = true;
};

struct Problem {
    std::shared_ptr<const TriMesh> mesh;
    std::shared_ptr<const TensionModel> model;
    BoundaryData data;
    /// Starting nodal values (clamped into the obstacle box); default is the obstacle midpoint.
    std::optional<Eigen::VectorXd> initial;
};

struct SolveReport {
    ScalarField field;
    std::vector<int> stages;
    std::vector<std::vector<double>> energy_history;  // per stage, one entry per accepted iterate
    std::vector<double> max_gauge_excess;             // per stage
    std::vector<int> stage_iterations;
    double el_residual_norm = 0.0;  // max over interior nodes off the obstacles
    double kkt_norm = 0.0;          // projected-gradient norm at the end
    double kkt_tolerance = 0.0;
    int iterations = 0;
    int contact_nodes = 0;
    int rigid_nodes = 0;
    double wall_time = 0.0;
    std::vector<std::string> warnings;
};

/// Minimizes Σ_T area F_m(∇u_T) for each m of the schedule by projected
/// Newton over lower <= u <= upper (nodewise obstacle values), warm-starting
/// each stage from the previous one.
///
/// Throws InadmissibleError, NonConvergenceError (Newton cap per stage) and
/// MeshDegenerateError (mesh outline disagreeing with the boundary data).
[[nodiscard]] SolveReport solve(const Problem& problem, const PenaltySchedule& schedule = {},
                                const Tolerances& tol = {});

}  // namespace limitshape
