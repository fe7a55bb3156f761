#include <doctest.h>

#include "limitshape/solver.hpp"

#include <cmath>
#include <memory>

using namespace limitshape;

namespace {

const std::vector<Vec2> unit_square{{0, 0}, {1, 0}, {1, 1}, {0, 1}};

std::vector<Vec2> subdivided(const std::vector<Vec2>& loop, int per_side) {
    std::vector<Vec2> out;
    for (std::size_t i = 0; i < loop.size(); ++i)
        for (int k = 0; k < per_side; ++k)
            out.push_back(loop[i] + (loop[(i + 1) % loop.size()] - loop[i]) * (static_cast<double>(k) / per_side));
    out.push_back(loop[0]);
    return out;
}

std::shared_ptr<const TriMesh> square_mesh(int n) {
    return std::make_shared<const TriMesh>(rectangle_mesh({0, 0}, {1, 1}, n, n));
}

// For F = |p|^2 the contracted ring average is (1-k)^2 |p|^2 + rho^2, so
// F_m(p) = ((1-k)^2 + eps) |p|^2 + r^2 / 2 wherever the barrier is inactive.
double quadratic_Fm(const PenalizedTension& F, const Vec2& p) {
    const double k = F.contraction(), r = F.mollification_radius();
    return ((1 - k) * (1 - k) + F.convexity_floor()) * p.squaredNorm() + 0.5 * r * r;
}

double wavy(const Vec2& y) { return 0.2 * std::sin(3 * y.x()) * std::cos(2 * y.y()) + 0.1 * y.x(); }

}  // namespace

TEST_CASE("energy of affine fields") {
    auto model = std::make_shared<const QuadraticTension>(GradientPolygon::square(2.0));
    const PenalizedTension F(model, 3);
    auto mesh = std::make_shared<const TriMesh>(polygon_mesh(std::vector<Vec2>{{0, 0}, {2, 0}, {2, 1}, {1, 1}, {1, 2}, {0, 2}}, 0.25));
    const Vec2 p0(0.4, -0.7);
    const auto u = ScalarField::interpolate(mesh, [&](const Vec2& x) { return 1.0 + p0.dot(x); });
    const auto e = assemble_energy(*mesh, F, u);
    CHECK(e.energy == doctest::Approx(3.0 * F.eval(p0, 0).value).epsilon(1e-12));
    CHECK(e.energy == doctest::Approx(3.0 * quadratic_Fm(F, p0)).epsilon(1e-12));
    // Constant flux: interior residuals vanish.
    CHECK(el_residual(u, F).cwiseAbs().maxCoeff() < 1e-13);
}

TEST_CASE("hand-computed energy of x1*x2 on two triangles") {
    auto model = std::make_shared<const QuadraticTension>(GradientPolygon::square(2.0));
    const PenalizedTension F(model, 2);
    auto mesh = square_mesh(1);
    const auto u = ScalarField::interpolate(mesh, [](const Vec2& x) { return x.x() * x.y(); });
    // Triangle gradients: (0,1) on the lower-right triangle, (1,0) on the upper-left one.
    const double expected = 0.5 * quadratic_Fm(F, {0, 1}) + 0.5 * quadratic_Fm(F, {1, 0});
    CHECK(assemble_energy(*mesh, F, u).energy == doctest::Approx(expected).epsilon(1e-13));
}

TEST_CASE("nodal gradient matches finite differences") {
    auto model = std::make_shared<const LozengeTension>();
    const PenalizedTension F(model, 4);
    auto mesh = std::make_shared<const TriMesh>(hexagon_mesh(2, 2, 2, 2.0, 2));
    auto u = ScalarField::interpolate(mesh, [](const Vec2& x) { return 0.05 * std::sin(3 * x.x()) + 0.1 * x.y() * x.x(); });
    const auto e = assemble_energy(*mesh, F, u);
    const double step = 1e-6;
    for (std::size_t i = 0; i < mesh->node_count(); ++i) {
        if (mesh->is_boundary(static_cast<int>(i))) {
            CHECK(e.gradient[i] == 0.0);
            continue;
        }
        auto up = u, dn = u;
        up.values()[i] += step;
        dn.values()[i] -= step;
        const double fd = (assemble_energy(*mesh, F, up).energy - assemble_energy(*mesh, F, dn).energy) / (2 * step);
        CHECK(e.gradient[i] == doctest::Approx(fd).epsilon(1e-6).scale(1e-3));
    }
}

TEST_CASE("stationarity and perturbation of the residual") {
    auto model = std::make_shared<const QuadraticTension>(GradientPolygon::square(2.0));
    const PenalizedTension F(model, 3);
    auto mesh = square_mesh(6);
    const auto zero = ScalarField::interpolate(mesh, [](const Vec2&) { return 0.0; });
    CHECK(assemble_energy(*mesh, F, zero).gradient.cwiseAbs().maxCoeff() < 1e-15);

    // A bump of height δ at one node: residual ≈ δ times the second difference of the energy.
    const int node = 3 * 7 + 3;
    const double delta = 1e-3;
    auto bumped = zero;
    bumped.values()[node] = delta;
    const double r = el_residual(bumped, F)[node];
    auto e_at = [&](double s) {
        auto v = zero;
        v.values()[node] = s;
        return assemble_energy(*mesh, F, v).energy;
    };
    const double second = (e_at(delta) - 2 * e_at(0.0) + e_at(-delta)) / (delta * delta);
    CHECK(r > 0);
    CHECK(r == doctest::Approx(delta * second).epsilon(1e-6));
}

TEST_CASE("constraint violation of a constructed field") {
    const auto N = GradientPolygon::square();
    auto mesh = square_mesh(4);
    auto u = ScalarField::interpolate(mesh, [](const Vec2& x) { return 0.5 * x.x(); });
    CHECK(constraint_violation(u, N).max_excess == doctest::Approx(-0.5));
    CHECK(constraint_violation(u, N).offending_triangles.empty());
    const double t = 0.3;
    u = ScalarField::interpolate(mesh, [&](const Vec2& x) { return (1 + t) * x.x(); });
    const auto cv = constraint_violation(u, N);
    CHECK(cv.max_excess == doctest::Approx(t).epsilon(1e-12));
    CHECK(cv.offending_triangles.size() == mesh->triangle_count());
    // The boundary layer removes everything on a 4x4 mesh with d_K = 0.5.
    CHECK(constraint_violation(u, N, 0.5).offending_triangles.empty());
}

TEST_CASE("solve reproduces linear minimizers") {
    auto model = std::make_shared<const QuadraticTension>(GradientPolygon::square());
    const Vec2 p0(0.3, -0.45);
    Problem pb{square_mesh(8), model, BoundaryData::linear(subdivided(unit_square, 1), p0, 0.2), {}};
    const auto rep = solve(pb);
    for (std::size_t i = 0; i < pb.mesh->node_count(); ++i)
        CHECK(rep.field.values()[i] == doctest::Approx(0.2 + p0.dot(pb.mesh->nodes[i])).epsilon(1e-8).scale(1.0));
    CHECK(rep.el_residual_norm <= rep.kkt_tolerance);
}

TEST_CASE("solve rejects inadmissible data") {
    auto model = std::make_shared<const QuadraticTension>(GradientPolygon::square());
    auto f = [](const Vec2& y) { return y.y() > 1 - 1e-12 ? 2.0 * std::min(y.x(), 1 - y.x()) : 0.0; };
    Problem pb{square_mesh(8), model, BoundaryData::from_function(subdivided(unit_square, 8), f), {}};
    CHECK_THROWS_AS((void)solve(pb), InadmissibleError);
}

TEST_CASE("solve invariants on wavy data") {
    auto model = std::make_shared<const QuadraticTension>(GradientPolygon::square(), 1.0, Vec2(0.2, 0.1));
    const auto data = BoundaryData::from_function(subdivided(unit_square, 32), wavy);
    auto mesh = square_mesh(16);
    Problem pb{mesh, model, data, {}};
    const auto rep = solve(pb);
    REQUIRE(!rep.stages.empty());
    CHECK(rep.kkt_norm <= rep.kkt_tolerance);
    CHECK(rep.el_residual_norm <= rep.kkt_tolerance);

    for (const auto& h : rep.energy_history)
        for (std::size_t k = 1; k < h.size(); ++k) CHECK(h[k] <= h[k - 1] + 1e-12 * std::abs(h[k - 1]));
    for (std::size_t k = 1; k < rep.max_gauge_excess.size(); ++k)
        CHECK(rep.max_gauge_excess[k] <= rep.max_gauge_excess[k - 1] + 1e-3);
    CHECK(rep.max_gauge_excess.back() <= 0.05);

    const Obstacles obs(data, model->polygon());
    for (std::size_t i = 0; i < mesh->node_count(); ++i) {
        const auto [lo, up] = obs.pair(mesh->nodes[i]);
        CHECK(rep.field.values()[i] >= lo - 1e-12);
        CHECK(rep.field.values()[i] <= up + 1e-12);
    }

    // Uniqueness: the zero field and the upper obstacle lead to the same minimizer.
    Eigen::VectorXd zero = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(mesh->node_count()));
    Eigen::VectorXd upper(zero.size());
    for (std::size_t i = 0; i < mesh->node_count(); ++i) upper[i] = obs.upper(mesh->nodes[i]);
    const auto a = solve({mesh, model, data, zero});
    const auto b = solve({mesh, model, data, upper});
    CHECK((a.field.values() - b.field.values()).cwiseAbs().maxCoeff() < 1e-6);

    // Translating the data translates the minimizer.
    auto shifted = data;
    for (auto& v : shifted.values) v += 0.75;
    const auto c = solve({mesh, model, shifted, {}});
    CHECK((c.field.values() - rep.field.values() - Eigen::VectorXd::Constant(zero.size(), 0.75)).cwiseAbs().maxCoeff() <
          1e-8);
}

TEST_CASE("energy consistency under refinement") {
    auto model = std::make_shared<const QuadraticTension>(GradientPolygon::square(), 1.0, Vec2(0.2, 0.1));
    const auto data = BoundaryData::from_function(subdivided(unit_square, 32), wavy);
    PenaltySchedule sched;
    sched.first = sched.last = 4;
    const PenalizedTension F(model, 4, sched);
    double previous = 0.0;
    for (int n : {8, 16, 32}) {
        auto mesh = square_mesh(n);
        const auto rep = solve({mesh, model, data, {}}, sched);
        const double e = assemble_energy(*mesh, F, rep.field).energy;
        if (n > 8) CHECK(e <= previous + mesh->mesh_size());
        previous = e;
    }
}

TEST_CASE("lozenge solve on a hexagon") {
    auto model = std::make_shared<const LozengeTension>();
    auto mesh = std::make_shared<const TriMesh>(hexagon_mesh(3, 3, 3, 3.0, 2));
    // Boundary heights of the empty 3x3x3 box: at a lattice corner (i, j) the
    // largest 3y + i - j over box points (y+i, y, y-j) on a back face.
    std::vector<Vec2> corners;
    std::vector<double> heights;
    for (const auto& [i, j] : hexagon_corners(3, 3, 3)) {
        int best = -1000;
        for (int y = 0; y <= 3; ++y) {
            const int X = y + i, Z = y - j;
            if (X < 0 || X > 3 || Z < 0 || Z > 3 || (X != 0 && y != 0 && Z != 0)) continue;
            best = std::max(best, 3 * y + i - j);
        }
        corners.push_back(lattice_point(i, j) / 3.0);
        heights.push_back(best / 9.0);
    }
    corners.push_back(corners[0]);
    heights.push_back(heights[0]);
    const BoundaryData data{corners, heights, 0.01};
    const auto rep = solve({mesh, model, data, {}});
    CHECK(rep.max_gauge_excess.back() <= 0.05);
    CHECK(rep.kkt_norm <= rep.kkt_tolerance);
    // Box complement u(x) -> 1 - u(-x) preserves data and energy, so the centre sits at 1/2.
    CHECK(std::abs(rep.field.value_at({0.0, 0.0}) - 0.5) < 1e-6);
}

TEST_CASE("singular points fall back to the convexity floor") {
    const auto N = GradientPolygon::square();
    const Vec2 q(0.1, -0.2);
    auto model = std::make_shared<const CustomSingularTension>(N, std::vector<SingularTerm>{{q, 1.0, 0.5}});
    PenaltySchedule sched;
    sched.first = sched.last = 2;
    const PenalizedTension F(model, 2, sched);
    // Slope whose first mollifier ring point lands on q.
    const Vec2 z0 = N.interior_point();
    const Vec2 ring0 = Vec2(F.mollification_radius() / std::sqrt(2.0), 0.0);
    const Vec2 p0 = z0 + (q - ring0 - z0) / (1 - F.contraction());
    CHECK_THROWS_AS((void)F.eval(p0, 2), SingularPointError);
    const auto rep = solve({square_mesh(4), model, BoundaryData::linear(subdivided(unit_square, 1), p0), {}}, sched);
    REQUIRE(rep.warnings.size() == 1);
    CHECK(rep.warnings[0].find("singular") != std::string::npos);
    for (std::size_t i = 0; i < rep.field.mesh().node_count(); ++i)
        CHECK(rep.field.values()[i] == doctest::Approx(p0.dot(rep.field.mesh().nodes[i])).scale(1.0).epsilon(1e-8));
}
