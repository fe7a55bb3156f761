#include <doctest.h>

#include "limitshape/tension.hpp"

#include <boost/math/quadrature/tanh_sinh.hpp>

#include <cmath>
#include <numbers>
#include <random>

using namespace limitshape;
using std::numbers::pi;

namespace {

// Independent route: tanh-sinh quadrature of the raw integrand.
double lobachevsky_oracle(double theta) {
    boost::math::quadrature::tanh_sinh<double> integrator;
    return -integrator.integrate([](double t) { return std::log(std::abs(2.0 * std::sin(t))); }, 0.0, theta);
}

Vec2 random_inside(const GradientPolygon& N, std::mt19937_64& rng, double margin) {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    while (true) {
        const Vec2 p(u(rng), u(rng));
        if (N.gauge_excess(p) < -margin) return p;
    }
}

std::vector<std::shared_ptr<const TensionModel>> all_models() {
    return {std::make_shared<QuadraticTension>(GradientPolygon::square()),
            std::make_shared<LozengeTension>(),
            std::make_shared<CustomSingularTension>(
                GradientPolygon::square(),
                std::vector<SingularTerm>{{{0.2, 0.1}, 1.0, 0.5}, {{-0.4, 0.3}, 0.5, 0.25}})};
}

}  // namespace

TEST_CASE("lobachevsky against tanh-sinh quadrature") {
    for (double t : {0.01, 0.3, pi / 6, pi / 3, 1.2, pi / 2, 2.0, 2.9, 3.1}) {
        CHECK(std::abs(lobachevsky(t) - lobachevsky_oracle(t)) < 1e-9);
    }
    CHECK(std::abs(lobachevsky(pi / 3) - 0.338313868803218) < 1e-12);
    CHECK(std::abs(lobachevsky(0.4) + lobachevsky(pi - 0.4)) < 1e-14);
    CHECK(std::abs(lobachevsky(0.4 + pi) - lobachevsky(0.4)) < 1e-13);
    CHECK(lobachevsky(0.0) == 0.0);
}

TEST_CASE("quadratic tension closed form") {
    QuadraticTension F(GradientPolygon::square());
    const auto s = F.eval({0.3, 0.4}, 2);
    CHECK(s.value == doctest::Approx(0.25));
    CHECK((s.gradient - Vec2(0.6, 0.8)).norm() < 1e-15);
    CHECK((s.hessian - 2.0 * Mat2::Identity()).norm() < 1e-15);
    CHECK_THROWS_AS((void)F.eval({1.5, 0}, 0), OutsideDomainError);
}

TEST_CASE("lozenge tension values") {
    LozengeTension F;
    const double oracle = -3.0 / pi * lobachevsky_oracle(pi / 3);
    const double v = F.eval(F.polygon().interior_point(), 0).value;
    CHECK(std::abs(v - oracle) < 1e-6);
    CHECK(std::abs(v - (-0.32307)) < 1e-5);

    const auto& N = F.polygon();
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int k = 0; k < 1000; ++k) {
        const std::size_t side = k % 3;
        const double t = u(rng);
        CHECK(std::abs(F.eval((1 - t) * N.vertex(side) + t * N.vertex(side + 1), 0).value) < 1e-6);
    }
    CHECK_THROWS_AS((void)F.eval(N.vertex(0), 1), OutsideDomainError);
}

TEST_CASE("lozenge tension symmetric under permutations of the proportions") {
    LozengeTension F;
    const auto& N = F.polygon();
    std::mt19937_64 rng(9);
    for (int k = 0; k < 200; ++k) {
        const Vec2 p = random_inside(N, rng, 1e-3);
        const auto a = F.proportions(p);
        const double v = F.eval(p, 0).value;
        const std::array<std::array<int, 3>, 6> perms{
            {{0, 1, 2}, {0, 2, 1}, {1, 0, 2}, {1, 2, 0}, {2, 0, 1}, {2, 1, 0}}};
        for (const auto& perm : perms) {
            const Vec2 q = a[perm[0]] * N.vertex(0) + a[perm[1]] * N.vertex(1) + a[perm[2]] * N.vertex(2);
            CHECK(F.eval(q, 0).value == doctest::Approx(v).epsilon(1e-12));
        }
    }
}

TEST_CASE("midpoint convexity and positive definite hessian") {
    for (const auto& F : all_models()) {
        CAPTURE(F->name());
        const auto& N = F->polygon();
        std::mt19937_64 rng(13);
        for (int k = 0; k < 10000; ++k) {
            const Vec2 p = random_inside(N, rng, 0.0);
            const Vec2 q = random_inside(N, rng, 0.0);
            CHECK(F->eval(0.5 * (p + q), 0).value <= 0.5 * (F->eval(p, 0).value + F->eval(q, 0).value) + 1e-12);
        }
        for (int k = 0; k < 1000; ++k) {
            const Vec2 p = random_inside(N, rng, 1e-3);
            if (F->near_singular(p)) continue;
            const Eigen::SelfAdjointEigenSolver<Mat2> es(F->eval(p, 2).hessian);
            CHECK(es.eigenvalues()(0) > 0.0);
        }
    }
}

TEST_CASE("derivatives match finite differences") {
    for (const auto& F : all_models()) {
        CAPTURE(F->name());
        const auto& N = F->polygon();
        std::mt19937_64 rng(17);
        const double h = 1e-5;
        int checked = 0;
        while (checked < 1000) {
            const Vec2 p = random_inside(N, rng, 0.02);
            bool close = false;
            for (const auto& q : F->singular_points()) close = close || (p - q).norm() < 0.02;
            if (close) continue;
            ++checked;
            const auto s = F->eval(p, 2);
            Vec2 fd_grad;
            Mat2 fd_hess;
            for (int d = 0; d < 2; ++d) {
                Vec2 e = Vec2::Zero();
                e[d] = h;
                fd_grad[d] = (F->eval(p + e, 0).value - F->eval(p - e, 0).value) / (2 * h);
                fd_hess.col(d) = (F->eval(p + e, 1).gradient - F->eval(p - e, 1).gradient) / (2 * h);
            }
            CHECK((fd_grad - s.gradient).norm() <= 1e-6 * std::max(1.0, s.gradient.norm()));
            CHECK((fd_hess - s.hessian).norm() <= 1e-4 * std::max(1.0, s.hessian.norm()));
        }
    }
}

TEST_CASE("singular points decline second derivatives") {
    CustomSingularTension F(GradientPolygon::square(), {{{0.2, 0.1}, 1.0, 0.5}});
    CHECK_NOTHROW((void)F.eval({0.2, 0.1}, 1));
    CHECK_THROWS_AS((void)F.eval({0.2 + 1e-6, 0.1}, 2), SingularPointError);
    CHECK_THROWS_AS((void)hessian_bounds(F, SampleRegion::disk({0.2, 0.1}, 0.05), 100), SingularPointError);
    CHECK_THROWS_AS(CustomSingularTension(GradientPolygon::square(), {{{0.0, 0.0}, 1.0, 1.5}}), ConfigError);
}

// ---------------------------------------------------------------------------
// Penalized family
// ---------------------------------------------------------------------------

TEST_CASE("penalized family: inactive inside, exact cubic penalty outside") {
    auto base = std::make_shared<QuadraticTension>(GradientPolygon::square());
    for (int m = 1; m <= 8; ++m) {
        PenalizedTension Fm(base, m);
        const double eps = Fm.convexity_floor();
        // Interior: mollified F plus eps|p|^2; error bounded by the contraction.
        const Vec2 p(0.2, -0.3);
        const double err = std::abs(Fm.eval(p, 0).value - (base->eval(p, 0).value + eps * p.squaredNorm()));
        CHECK(err <= 4.0 * Fm.contraction() + Fm.mollification_radius() * Fm.mollification_radius());
        CHECK(Fm.penalty(p) == 0.0);
        for (double t : {1e-3, 0.1, 0.7}) {
            const double e = (1.0 + t) - 1.0;
            CHECK(Fm.penalty({1.0 + t, 0.0}) == doctest::Approx(Fm.penalty_weight() * e * e * e).epsilon(1e-14));
        }
        if (m > 1) CHECK(Fm.penalty_weight() > PenalizedTension(base, m - 1).penalty_weight());
    }
}

TEST_CASE("penalized family is strictly convex with a uniform floor") {
    for (const auto& F : all_models()) {
        CAPTURE(F->name());
        for (int m : {1, 4, 8}) {
            PenalizedTension Fm(F, m);
            std::mt19937_64 rng(21 + m);
            std::uniform_real_distribution<double> u(-3.0, 3.0);
            int outside = 0;
            while (outside < 1000) {
                const Vec2 p(u(rng), u(rng));
                if (F->polygon().contains(p)) continue;
                ++outside;
                const Mat2 H = Fm.eval(p, 2).hessian;
                const Eigen::SelfAdjointEigenSolver<Mat2> es(H);
                // Rounding in the penalty block is relative to its (large) norm.
                CHECK(es.eigenvalues()(0) >= Fm.convexity_floor() - 1e-15 * H.norm());
            }
            // Midpoint convexity across the glued zones.
            std::uniform_real_distribution<double> w(-1.6, 1.6);
            for (int k = 0; k < 3000; ++k) {
                const Vec2 a(w(rng), w(rng)), b(w(rng), w(rng));
                const double lhs = Fm.eval(0.5 * (a + b), 0).value;
                const double rhs = 0.5 * (Fm.eval(a, 0).value + Fm.eval(b, 0).value);
                CHECK(lhs <= rhs + 1e-9 * std::max(1.0, std::abs(rhs)));
            }
        }
    }
}

TEST_CASE("penalized family derivatives match finite differences near the glue") {
    auto base = std::make_shared<LozengeTension>();
    PenalizedTension Fm(base, 3);
    const auto& N = Fm.polygon();
    std::mt19937_64 rng(4);
    std::uniform_real_distribution<double> u(-0.1, 0.3);
    std::uniform_real_distribution<double> t(0.0, 1.0);
    for (int k = 0; k < 500; ++k) {
        const std::size_t side = k % 3;
        const double s = t(rng);
        const Vec2 p = (1 - s) * N.vertex(side) + s * N.vertex(side + 1) +
                       4.0 * u(rng) * Fm.mollification_radius() * N.outward_normal(side);
        const auto e = Fm.eval(p, 2);
        const double h = 1e-6;
        for (int d = 0; d < 2; ++d) {
            Vec2 dv = Vec2::Zero();
            dv[d] = h;
            const double fd = (Fm.eval(p + dv, 0).value - Fm.eval(p - dv, 0).value) / (2 * h);
            CHECK(std::abs(fd - e.gradient[d]) <= 1e-5 * std::max(1.0, e.gradient.norm()));
            const Vec2 fdh = (Fm.eval(p + dv, 1).gradient - Fm.eval(p - dv, 1).gradient) / (2 * h);
            CHECK((fdh - e.hessian.col(d)).norm() <= 1e-3 * std::max(1.0, e.hessian.norm()));
        }
    }
}

TEST_CASE("penalized family has cubic growth") {
    auto base = std::make_shared<LozengeTension>();
    PenalizedTension Fm(base, 2);
    const double R = 2.0 * Fm.polygon().diameter() + 2.0;
    for (int k = 0; k < 64; ++k) {
        const double a = 2 * pi * k / 64;
        for (double r : {R, 2 * R}) {
            const Vec2 p = r * Vec2(std::cos(a), std::sin(a));
            CHECK(Fm.eval(p, 0).value >= 0.5 * Fm.penalty_weight() * 0.1 * r * r * r);
        }
    }
}

TEST_CASE("penalized family converges uniformly on an interior sample") {
    for (const auto& F : all_models()) {
        CAPTURE(F->name());
        std::mt19937_64 rng(8);
        std::vector<Vec2> sample;
        for (int k = 0; k < 200; ++k) sample.push_back(random_inside(F->polygon(), rng, 0.01));
        double previous = 1e300;
        for (int m = 1; m <= 8; ++m) {
            PenalizedTension Fm(F, m);
            double worst = 0.0;
            for (const auto& p : sample) worst = std::max(worst, std::abs(Fm.eval(p, 0).value - F->eval(p, 0).value));
            CHECK(worst < previous);
            previous = worst;
        }
        CHECK(previous < 0.05);
    }
}

// ---------------------------------------------------------------------------
// Legendre transform and Hessian bounds
// ---------------------------------------------------------------------------

TEST_CASE("legendre transform of a self-dual quadratic") {
    const ConvexFunction half_square = [](const Vec2& p, int) {
        return TensionSample{0.5 * p.squaredNorm(), p, Mat2::Identity()};
    };
    for (const Vec2& q : {Vec2(0.3, -1.2), Vec2(2.0, 5.0), Vec2(0, 0)}) {
        const auto r = legendre(half_square, q);
        CHECK(r.value == doctest::Approx(0.5 * q.squaredNorm()).epsilon(1e-12));
        CHECK((r.argmax - q).norm() < 1e-10);
    }
}

TEST_CASE("legendre transform at zero is minus the minimum") {
    auto base = std::make_shared<LozengeTension>();
    PenalizedTension Fm(base, 3);
    const auto r = legendre(Fm, Vec2::Zero());
    CHECK(r.value == doctest::Approx(-Fm.eval(r.argmax, 0).value));
    CHECK(Fm.eval(r.argmax, 1).gradient.norm() < 1e-8);
}

TEST_CASE("legendre transform against a grid maximization") {
    auto base = std::make_shared<QuadraticTension>(GradientPolygon::square());
    PenalizedTension Fm(base, 2);
    std::mt19937_64 rng(31);
    std::uniform_real_distribution<double> u(-3.0, 3.0);
    for (int k = 0; k < 4; ++k) {
        const Vec2 q(u(rng), u(rng));
        const auto r = legendre(Fm, q);
        CHECK((Fm.eval(r.argmax, 1).gradient - q).norm() < 1e-8);
        // Coarse pass over [-R,R]^2, then 1e-3 and 1e-4 passes around the best cell.
        const double R = 2.0;
        double best = -1e300;
        Vec2 arg = Vec2::Zero();
        for (double x = -R; x <= R; x += 1e-2)
            for (double y = -R; y <= R; y += 1e-2) {
                const double v = q.dot(Vec2(x, y)) - Fm.eval({x, y}, 0).value;
                if (v > best) {
                    best = v;
                    arg = {x, y};
                }
            }
        for (double step : {1e-3, 1e-4}) {
            const Vec2 centre = arg;
            for (double x = centre.x() - 20 * step; x <= centre.x() + 20 * step; x += step)
                for (double y = centre.y() - 20 * step; y <= centre.y() + 20 * step; y += step) {
                    const double v = q.dot(Vec2(x, y)) - Fm.eval({x, y}, 0).value;
                    if (v > best) {
                        best = v;
                        arg = {x, y};
                    }
                }
        }
        CHECK(r.value >= best - 1e-12);
        CHECK(std::abs(r.value - best) < 1e-4);
    }
}

TEST_CASE("hessian bounds") {
    QuadraticTension Q(GradientPolygon::square());
    const auto qb = hessian_bounds(Q, SampleRegion::disk({0.1, 0.2}, 0.3), 500);
    CHECK(qb.lambda_min == doctest::Approx(2.0));
    CHECK(qb.lambda_max == doctest::Approx(2.0));

    LozengeTension L;
    const Vec2 c = L.polygon().interior_point();
    const auto lb = hessian_bounds(L, SampleRegion::disk(c, 0.05), 400);
    double omin = 1e300, omax = -1e300;
    for (double x = -0.05; x <= 0.05; x += 1e-3)
        for (double y = -0.05; y <= 0.05; y += 1e-3) {
            if (x * x + y * y > 0.05 * 0.05) continue;
            const Eigen::SelfAdjointEigenSolver<Mat2> es(L.eval(c + Vec2(x, y), 2).hessian);
            omin = std::min(omin, es.eigenvalues()(0));
            omax = std::max(omax, es.eigenvalues()(1));
        }
    CHECK(lb.samples > 100);
    // The two sample sets differ; allow the eigenvalue variation over one 1e-3 step.
    CHECK(lb.lambda_min >= omin * (1 - 1e-3));
    CHECK(lb.lambda_max <= omax * (1 + 1e-3));
    CHECK(lb.lambda_min <= lb.lambda_max);

    // Nested insets toward the boundary: lambda_min decreases toward 0.
    double previous = 1e300;
    for (double depth : {0.2, 0.1, 0.05, 0.02, 0.01, 0.005, 0.002}) {
        const auto b = hessian_bounds(L, SampleRegion::inset(L.polygon(), depth), 20000);
        CHECK(b.lambda_min <= previous);
        previous = b.lambda_min;
    }
    CHECK(previous < 0.05 * hessian_bounds(L, SampleRegion::inset(L.polygon(), 0.2), 20000).lambda_min);
}

TEST_CASE("modulus of convexity probe is positive and grows with distance") {
    LozengeTension L;
    const double small = convexity_gap_probe(L, 0.02, 2000);
    const double large = convexity_gap_probe(L, 0.08, 2000);
    CHECK(small > 0.0);
    CHECK(large > small);
}
