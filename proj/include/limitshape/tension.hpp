#pragma once

#include "limitshape/polygon.hpp"

#include <array>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace limitshape {

/// Lobachevsky function Λ(θ) = -∫_0^θ log|2 sin t| dt.
///
/// The log singularity at the origin is integrated in closed form and the
/// analytic remainder -log(sin t / t) by 20-point Gauss-Legendre after
/// reducing θ to [0, π/2] with Λ(θ+π) = Λ(θ) and Λ(π-θ) = -Λ(θ).
[[nodiscard]] double lobachevsky(double theta);

struct TensionSample {
    double value = 0.0;
    Vec2 gradient = Vec2::Zero();
    Mat2 hessian = Mat2::Zero();
};

// ---------------------------------------------------------------------------
// TensionModel
// ---------------------------------------------------------------------------

/// Convex surface tension on the closed gradient polygon, C^2 away from a
/// finite singular set.
class TensionModel {
public:
    TensionModel(GradientPolygon polygon, std::vector<Vec2> singular_points = {},
                 double singular_radius = 1e-4);
    virtual ~TensionModel() = default;

    [[nodiscard]] virtual std::string name() const = 0;

    /// order: 0 value, 1 adds gradient, 2 adds hessian.
    /// Throws OutsideDomainError off the closed polygon and SingularPointError
    /// for order 2 within the singular radius of a singular point.
    [[nodiscard]] TensionSample eval(const Vec2& p, int order) const;

    [[nodiscard]] const GradientPolygon& polygon() const noexcept { return polygon_; }
    [[nodiscard]] std::span<const Vec2> singular_points() const noexcept { return singular_; }
    [[nodiscard]] double singular_radius() const noexcept { return singular_radius_; }
    [[nodiscard]] bool near_singular(const Vec2& p) const;

    /// (min, max) of the tension over the closed polygon, from a dense sample.
    [[nodiscard]] std::pair<double, double> value_range() const;

protected:
    /// Called only for points in the closed polygon.
    [[nodiscard]] virtual TensionSample evaluate(const Vec2& p, int order) const = 0;

private:
    GradientPolygon polygon_;
    std::vector<Vec2> singular_;
    double singular_radius_;
    mutable std::optional<std::pair<double, double>> range_;
};

/// weight * |p - center|^2
class QuadraticTension final : public TensionModel {
public:
    explicit QuadraticTension(GradientPolygon polygon, double weight = 1.0, Vec2 center = Vec2::Zero());
    [[nodiscard]] std::string name() const override { return "quadratic"; }

protected:
    [[nodiscard]] TensionSample evaluate(const Vec2& p, int order) const override;

private:
    double weight_;
    Vec2 center_;
};

/// Lozenge-tiling surface tension -(1/π) Σ_k Λ(π a_k), where (a_1,a_2,a_3)
/// are the barycentric coordinates of the slope in the triangle N (the
/// lozenge proportions). Vertex k of N is the slope of the frozen phase made
/// only of lozenges of type k.
class LozengeTension final : public TensionModel {
public:
    explicit LozengeTension(GradientPolygon triangle = GradientPolygon::lozenge_triangle());
    [[nodiscard]] std::string name() const override { return "lozenge"; }
    [[nodiscard]] std::array<double, 3> proportions(const Vec2& p) const;

protected:
    [[nodiscard]] TensionSample evaluate(const Vec2& p, int order) const override;

private:
    std::array<Vec2, 3> bary_grad_;
    std::array<double, 3> bary_const_;
};

struct SingularTerm {
    Vec2 point;
    double weight = 1.0;
    double exponent = 0.5;  // s in (0,1); profile |p - q|^(1+s)
};

/// base * |p|^2 + Σ_j w_j |p - q_j|^(1+s_j)
class CustomSingularTension final : public TensionModel {
public:
    CustomSingularTension(GradientPolygon polygon, std::vector<SingularTerm> terms, double base_weight = 1.0,
                          double singular_radius = 1e-4);
    [[nodiscard]] std::string name() const override { return "custom-singular"; }

protected:
    [[nodiscard]] TensionSample evaluate(const Vec2& p, int order) const override;

private:
    std::vector<SingularTerm> terms_;
    double base_;
};

// ---------------------------------------------------------------------------
// PenalizedTension
// ---------------------------------------------------------------------------

/// Geometric continuation schedule for the smooth family F_m.
struct PenaltySchedule {
    int first = 1;
    int last = 8;
    double convexity_floor_base = 4.0;  // epsilon_m = base^-m
    double radius_factor = 0.5;         // r_m = radius_factor * 2^-m * depth(N)
};

/// Smooth, strictly convex, everywhere finite approximation F_m of a tension.
///
///   F_m(p) = smax(F_r(p), A(p)) + eps_m |p|^2,  A(p) = a0 + C_m Σ_i g(n_i.p - c_i)
///
/// with g(t) = max(t,0)^3 and F_r the tension pulled toward z0 by the factor
/// (1 - kappa_m) and averaged over an 8-point ring of radius r_m/√2. F_r is
/// only defined near N, so beyond the switch excess r_m/2 the value is A
/// alone; C_m is chosen so that A already dominates F_r there, which makes the
/// glued function convex. smax is a C^2 convex maximum that equals the plain
/// maximum when the arguments differ by more than 2*tau; in particular
/// F_m = F_r + eps_m|p|^2 on the closed polygon.
class PenalizedTension {
public:
    PenalizedTension(std::shared_ptr<const TensionModel> base, int m, const PenaltySchedule& schedule = {});

    [[nodiscard]] TensionSample eval(const Vec2& p, int order) const;
    /// C_m Σ_i g(n_i.p - c_i)
    [[nodiscard]] double penalty(const Vec2& p) const;

    [[nodiscard]] const TensionModel& base() const noexcept { return *base_; }
    [[nodiscard]] const GradientPolygon& polygon() const noexcept { return base_->polygon(); }
    [[nodiscard]] int index() const noexcept { return m_; }
    [[nodiscard]] double penalty_weight() const noexcept { return c_m_; }
    [[nodiscard]] double convexity_floor() const noexcept { return eps_m_; }
    [[nodiscard]] double mollification_radius() const noexcept { return radius_; }
    [[nodiscard]] double contraction() const noexcept { return kappa_; }

private:
    [[nodiscard]] TensionSample mollified(const Vec2& p, int order) const;
    [[nodiscard]] TensionSample barrier(const Vec2& p, int order) const;

    std::shared_ptr<const TensionModel> base_;
    int m_;
    double c_m_ = 0.0;
    double eps_m_ = 0.0;
    double radius_ = 0.0;
    double kappa_ = 0.0;
    double a0_ = 0.0;
    double tau_ = 0.5;
};

// ---------------------------------------------------------------------------
// Convex-analysis probes
// ---------------------------------------------------------------------------

struct LegendreResult {
    double value = 0.0;
    Vec2 argmax = Vec2::Zero();
    int iterations = 0;
};

using ConvexFunction = std::function<TensionSample(const Vec2&, int)>;

/// sup_p (p.q - f(p)) by damped Newton on the strictly convex f.
/// Throws NonConvergenceError after max_iterations.
[[nodiscard]] LegendreResult legendre(const ConvexFunction& f, const Vec2& q, double tol = 1e-12,
                                      const Vec2& start = Vec2::Zero(), int max_iterations = 200);
[[nodiscard]] LegendreResult legendre(const PenalizedTension& model, const Vec2& q, double tol = 1e-12);

/// A set of gradients, given by a membership predicate and a bounding box.
struct SampleRegion {
    std::function<bool(const Vec2&)> contains;
    Vec2 lo;
    Vec2 hi;

    static SampleRegion disk(const Vec2& center, double radius);
    static SampleRegion annulus(const Vec2& center, double inner, double outer);
    /// Points of N at boundary distance >= min_depth.
    static SampleRegion inset(const GradientPolygon& polygon, double min_depth);
};

struct HessianBounds {
    double lambda_min = 0.0;
    double lambda_max = 0.0;
    std::size_t samples = 0;
};

/// Extreme Hessian eigenvalues over a regular sample grid of about `samples`
/// points laid over the region's bounding box. Nested regions use nested
/// sample sets.
[[nodiscard]] HessianBounds hessian_bounds(const TensionModel& model, const SampleRegion& region,
                                           std::size_t samples);

/// Smallest sampled convexity gap F(q) - F(p) - ∇F(p).(q-p) over pairs at
/// distance delta inside N (a probe of the modulus of convexity).
[[nodiscard]] double convexity_gap_probe(const TensionModel& model, double delta, std::size_t pairs,
                                         std::uint64_t seed = 1);

/// Builds a model by name: "quadratic", "lozenge", "custom-singular".
[[nodiscard]] std::shared_ptr<const TensionModel> make_tension(const std::string& name, GradientPolygon polygon,
                                                               double weight, std::vector<SingularTerm> terms);

}  // namespace limitshape
