#include "limitshape/solver.hpp"

#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <sstream>

namespace limitshape {

// ---------------------------------------------------------------------------
// Discrete energy
// ---------------------------------------------------------------------------

namespace {

Vec2 triangle_gradient(const TriMesh& mesh, const Eigen::VectorXd& u, int t) {
    const auto& tri = mesh.triangles[t];
    Vec2 g = Vec2::Zero();
    for (int k = 0; k < 3; ++k) g += u[tri[k]] * mesh.hat_gradient(t, k);
    return g;
}

double energy_only(const TriMesh& mesh, const PenalizedTension& F, const Eigen::VectorXd& u) {
    double e = 0.0;
    for (std::size_t t = 0; t < mesh.triangle_count(); ++t) {
        const int i = static_cast<int>(t);
        e += mesh.area(i) * F.eval(triangle_gradient(mesh, u, i), 0).value;
    }
    return e;
}

struct Linearization {
    double energy = 0.0;
    Eigen::VectorXd gradient;
    std::vector<Eigen::Triplet<double>> hessian;
    int substituted = 0;  // triangles whose Hessian fell back to eps_m I
};

// Energy, full nodal gradient and (when `free_index` is given) the Hessian
// restricted to free nodes.
Linearization linearize(const TriMesh& mesh, const PenalizedTension& F, const Eigen::VectorXd& u,
                        const std::vector<int>* free_index) {
    Linearization out;
    out.gradient = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(mesh.node_count()));
    for (std::size_t t = 0; t < mesh.triangle_count(); ++t) {
        const int ti = static_cast<int>(t);
        const auto& tri = mesh.triangles[t];
        const Vec2 p = triangle_gradient(mesh, u, ti);
        TensionSample s;
        if (free_index) {
            try {
                s = F.eval(p, 2);
            } catch (const SingularPointError&) {
                s = F.eval(p, 1);
                s.hessian = F.convexity_floor() * Mat2::Identity();
                ++out.substituted;
            }
        } else {
            s = F.eval(p, 1);
        }
        const double a = mesh.area(ti);
        out.energy += a * s.value;
        for (int k = 0; k < 3; ++k) out.gradient[tri[k]] += a * s.gradient.dot(mesh.hat_gradient(ti, k));
        if (!free_index) continue;
        for (int k = 0; k < 3; ++k) {
            const int r = (*free_index)[tri[k]];
            if (r < 0) continue;
            const Vec2 hk = s.hessian * mesh.hat_gradient(ti, k);
            for (int l = 0; l < 3; ++l) {
                const int c = (*free_index)[tri[l]];
                if (c < 0) continue;
                out.hessian.emplace_back(r, c, a * hk.dot(mesh.hat_gradient(ti, l)));
            }
        }
    }
    for (int b : mesh.boundary_nodes()) out.gradient[b] = 0.0;
    return out;
}

}  // namespace

EnergyEval assemble_energy(const TriMesh& mesh, const PenalizedTension& model, const ScalarField& u) {
    if (&mesh != &u.mesh() && mesh.node_count() != u.mesh().node_count())
        throw MeshMismatchError("field does not live on this mesh");
    auto lin = linearize(mesh, model, u.values(), nullptr);
    return {lin.energy, std::move(lin.gradient)};
}

Eigen::VectorXd el_residual(const ScalarField& u, const PenalizedTension& model) {
    return linearize(u.mesh(), model, u.values(), nullptr).gradient;
}

ConstraintViolation constraint_violation(const ScalarField& u, const GradientPolygon& N, double boundary_layer) {
    ConstraintViolation out;
    out.max_excess = -std::numeric_limits<double>::infinity();
    const TriMesh& mesh = u.mesh();
    for (std::size_t t = 0; t < mesh.triangle_count(); ++t) {
        const int ti = static_cast<int>(t);
        if (boundary_layer > 0 && mesh.boundary_distance(mesh.centroid(ti)) < boundary_layer) continue;
        const double e = N.gauge_excess(u.gradient(ti));
        out.max_excess = std::max(out.max_excess, e);
        if (e > 0) out.offending_triangles.push_back(ti);
    }
    return out;
}

// ---------------------------------------------------------------------------
// solve
// ---------------------------------------------------------------------------

namespace {

struct Box {
    Eigen::VectorXd lo, hi;
    std::vector<char> fixed;
};

double projected_gradient_norm(const Eigen::VectorXd& u, const Eigen::VectorXd& g, const Box& box) {
    double r = 0.0;
    for (Eigen::Index i = 0; i < u.size(); ++i) {
        if (box.fixed[i]) continue;
        const double step = std::clamp(u[i] - g[i], box.lo[i], box.hi[i]) - u[i];
        r = std::max(r, std::abs(step));
    }
    return r;
}

bool at_bound(double u, double lo, double hi, double g) {
    const double d = 1e-13 * (1.0 + std::abs(u));
    return (u <= lo + d && g > 0) || (u >= hi - d && g < 0);
}

// One continuation stage of projected Newton. Returns iterations used.
int newton_stage(const TriMesh& mesh, const PenalizedTension& F, const Box& box, Eigen::VectorXd& u, double kkt,
                 int max_iterations, std::vector<double>& history, int& substituted) {
    const Eigen::Index n = u.size();
    std::vector<int> free_index(static_cast<std::size_t>(n), -1);
    for (int it = 0; it <= max_iterations; ++it) {
        // Free set: movable nodes not pushing into an active bound.
        auto first = linearize(mesh, F, u, nullptr);
        if (history.empty()) history.push_back(first.energy);
        const double pg = projected_gradient_norm(u, first.gradient, box);
        if (pg <= kkt) return it;
        if (it == max_iterations) break;

        std::vector<int> free_nodes;
        for (Eigen::Index i = 0; i < n; ++i) {
            free_index[i] = -1;
            if (box.fixed[i] || at_bound(u[i], box.lo[i], box.hi[i], first.gradient[i])) continue;
            free_index[i] = static_cast<int>(free_nodes.size());
            free_nodes.push_back(static_cast<int>(i));
        }
        const auto lin = linearize(mesh, F, u, &free_index);
        substituted += lin.substituted;
        const Eigen::Index nf = static_cast<Eigen::Index>(free_nodes.size());
        Eigen::VectorXd d = Eigen::VectorXd::Zero(n);
        if (nf > 0) {
            Eigen::SparseMatrix<double> H(nf, nf);
            H.setFromTriplets(lin.hessian.begin(), lin.hessian.end());
            Eigen::VectorXd rhs(nf);
            for (Eigen::Index k = 0; k < nf; ++k) rhs[k] = -lin.gradient[free_nodes[k]];
            Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt(H);
            Eigen::VectorXd step;
            bool ok = ldlt.info() == Eigen::Success;
            if (ok) {
                step = ldlt.solve(rhs);
                ok = ldlt.info() == Eigen::Success && step.allFinite() && step.dot(rhs) > 0;
            }
            if (!ok) {
                // Diagonally scaled gradient step.
                step = rhs;
                for (Eigen::Index k = 0; k < nf; ++k) step[k] /= std::max(H.coeff(k, k), 1e-300);
            }
            for (Eigen::Index k = 0; k < nf; ++k) d[free_nodes[k]] = step[k];
        }
        // Bound-touching nodes move along the projected gradient so the iteration can leave a bound.
        const double E0 = lin.energy;
        auto trial = [&](double alpha) {
            Eigen::VectorXd v = u;
            for (Eigen::Index i = 0; i < n; ++i)
                if (!box.fixed[i]) v[i] = std::clamp(u[i] + alpha * d[i], box.lo[i], box.hi[i]);
            return v;
        };
        double alpha = 1.0;
        bool accepted = false;
        Eigen::VectorXd v;
        double Ev = 0.0;
        while (alpha > 1e-10) {
            v = trial(alpha);
            Ev = energy_only(mesh, F, v);
            if (Ev <= E0 + 1e-4 * lin.gradient.dot(v - u)) {
                accepted = true;
                break;
            }
            alpha *= 0.5;
        }
        if (!accepted) {
            // Energy differences are below rounding: bisect on the directional
            // derivative along the projected path, which stays informative.
            auto slope = [&](double a) {
                const Eigen::VectorXd w = trial(a);
                const auto g = linearize(mesh, F, w, nullptr).gradient;
                double s = 0.0;
                for (Eigen::Index i = 0; i < n; ++i)
                    if (!box.fixed[i] && w[i] > box.lo[i] && w[i] < box.hi[i]) s += g[i] * d[i];
                return s;
            };
            double lo = 0.0, hi = 1.0;
            while (slope(hi) < 0 && hi < 1e6) {
                lo = hi;
                hi *= 2.0;
            }
            for (int k = 0; k < 60; ++k) {
                const double mid = 0.5 * (lo + hi);
                (slope(mid) < 0 ? lo : hi) = mid;
            }
            v = trial(0.5 * (lo + hi));
            Ev = energy_only(mesh, F, v);
            const auto next = linearize(mesh, F, v, nullptr);
            if (Ev <= E0 + 1e-12 * std::abs(E0) && projected_gradient_norm(v, next.gradient, box) < pg) {
                accepted = true;
            } else {
                std::ostringstream msg;
                msg << "line search failed at penalty index " << F.index() << " with KKT residual " << pg;
                throw NonConvergenceError(msg.str());
            }
        }
        u = v;
        history.push_back(Ev);
    }
    std::ostringstream msg;
    msg << "Newton iteration cap reached at penalty index " << F.index();
    throw NonConvergenceError(msg.str());
}

}  // namespace

SolveReport solve(const Problem& problem, const PenaltySchedule& schedule, const Tolerances& tol) {
    const auto started = std::chrono::steady_clock::now();
    if (!problem.mesh || !problem.model) throw ConfigError("solve needs a mesh and a tension model");
    if (schedule.first < 1 || schedule.last < schedule.first) throw ConfigError("penalty schedule is empty");
    const TriMesh& mesh = *problem.mesh;
    const GradientPolygon& N = problem.model->polygon();
    const Obstacles obstacles(problem.data, N);

    const Eigen::Index n = static_cast<Eigen::Index>(mesh.node_count());
    Box box{Eigen::VectorXd(n), Eigen::VectorXd(n), std::vector<char>(static_cast<std::size_t>(n), 0)};
    double extent = 0.0;
    for (const auto& p : mesh.outline) extent = std::max(extent, p.norm());
    SolveReport report{ScalarField(problem.mesh, Eigen::VectorXd::Zero(n)), {}, {}, {}, {}, 0, 0, 0, 0, 0, 0, 0, {}};
    for (Eigen::Index i = 0; i < n; ++i) {
        const Vec2& x = mesh.nodes[i];
        if (mesh.is_boundary(static_cast<int>(i))) {
            if (distance_to_loop(problem.data.polyline, x) > 1e-9 * (1.0 + extent))
                throw MeshDegenerateError("mesh boundary node is off the boundary polyline");
            box.lo[i] = box.hi[i] = problem.data.value_at(x);
            box.fixed[i] = 1;
            continue;
        }
        const auto [lo, hi] = obstacles.pair(x);
        box.lo[i] = std::min(lo, hi);
        box.hi[i] = std::max(lo, hi);
        if (hi - lo <= 1e-10 * (1.0 + std::abs(hi))) {
            box.lo[i] = box.hi[i] = 0.5 * (lo + hi);
            box.fixed[i] = 1;
            ++report.rigid_nodes;
        }
    }
    if (report.rigid_nodes > 0) {
        std::ostringstream msg;
        msg << "rigid region: " << report.rigid_nodes
            << " interior nodes have coinciding obstacles and are pinned to the common value";
        report.warnings.push_back(msg.str());
    }

    Eigen::VectorXd u = problem.initial ? *problem.initial : Eigen::VectorXd(0.5 * (box.lo + box.hi));
    if (u.size() != n) throw MeshMismatchError("initial field does not match the mesh");
    for (Eigen::Index i = 0; i < n; ++i) u[i] = std::clamp(u[i], box.lo[i], box.hi[i]);

    const double kkt = tol.kkt > 0 ? tol.kkt : 1e-8 * mesh.total_area();
    const double layer = tol.boundary_layer > 0 ? tol.boundary_layer : 4.0 * mesh.mesh_size();
    report.kkt_tolerance = kkt;
    int substituted = 0;
    std::optional<PenalizedTension> last;
    for (int m = schedule.first; m <= schedule.last; ++m) {
        last.emplace(problem.model, m, schedule);
        std::vector<double> history;
        const int its = newton_stage(mesh, *last, box, u, kkt, tol.max_newton, history, substituted);
        report.stages.push_back(m);
        report.stage_iterations.push_back(its);
        report.iterations += its;
        report.energy_history.push_back(history);
        report.max_gauge_excess.push_back(constraint_violation(ScalarField(problem.mesh, u), N, layer).max_excess);
        if (tol.early_stop && report.stages.size() >= 2) {
            const double e1 = report.energy_history[report.energy_history.size() - 2].back();
            const double e2 = history.back();
            if (report.max_gauge_excess.back() < tol.constraint && std::abs(e2 - e1) < tol.energy * std::abs(e2))
                break;
        }
    }
    if (substituted > 0) {
        std::ostringstream msg;
        msg << "singular points: " << substituted << " triangle Hessians replaced by eps_m I";
        report.warnings.push_back(msg.str());
    }

    report.field = ScalarField(problem.mesh, u);
    const auto lin = linearize(mesh, *last, u, nullptr);
    report.kkt_norm = projected_gradient_norm(u, lin.gradient, box);
    for (Eigen::Index i = 0; i < n; ++i) {
        if (box.fixed[i]) continue;
        const double d = 1e-13 * (1.0 + std::abs(u[i]));
        if (u[i] <= box.lo[i] + d || u[i] >= box.hi[i] - d) {
            ++report.contact_nodes;
            continue;
        }
        report.el_residual_norm = std::max(report.el_residual_norm, std::abs(lin.gradient[i]));
    }
    report.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    return report;
}

}  // namespace limitshape
