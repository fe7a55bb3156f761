#include "limitshape/tension.hpp"

#include <boost/math/quadrature/gauss.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>

namespace limitshape {

using std::numbers::pi;

double lobachevsky(double theta) {
    double t = std::fmod(theta, pi);
    if (t < 0) t += pi;
    double sign = 1.0;
    if (t > 0.5 * pi) {
        t = pi - t;
        sign = -1.0;
    }
    if (t == 0.0) return 0.0;
    // -log(2 sin s) = -log(2s) - log(sin s / s); the first part integrates to t - t log(2t).
    auto remainder = [](double s) {
        if (s < 1e-4) {
            const double s2 = s * s;
            return s2 / 6.0 + s2 * s2 / 180.0;
        }
        return -std::log(std::sin(s) / s);
    };
    const double smooth = boost::math::quadrature::gauss<double, 20>::integrate(remainder, 0.0, t);
    return sign * (t - t * std::log(2.0 * t) + smooth);
}

// ---------------------------------------------------------------------------
// TensionModel
// ---------------------------------------------------------------------------

TensionModel::TensionModel(GradientPolygon polygon, std::vector<Vec2> singular_points, double singular_radius)
    : polygon_(std::move(polygon)), singular_(std::move(singular_points)), singular_radius_(singular_radius) {
    for (const auto& q : singular_)
        if (polygon_.gauge_excess(q) >= 0.0) throw ConfigError("singular point must lie inside the gradient polygon");
}

bool TensionModel::near_singular(const Vec2& p) const {
    return std::any_of(singular_.begin(), singular_.end(),
                       [&](const Vec2& q) { return (p - q).norm() < singular_radius_; });
}

TensionSample TensionModel::eval(const Vec2& p, int order) const {
    if (polygon_.gauge_excess(p) > kGeomTol) throw OutsideDomainError("tension evaluated outside the gradient polygon");
    if (order >= 2 && near_singular(p)) throw SingularPointError("hessian requested within the singular radius");
    return evaluate(p, order);
}

std::pair<double, double> TensionModel::value_range() const {
    if (range_) return *range_;
    double lo = std::numeric_limits<double>::infinity();
    double hi = -lo;
    auto take = [&](const Vec2& p) {
        const double v = evaluate(polygon_.project(p), 0).value;
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    };
    Vec2 bmin = polygon_.vertex(0), bmax = polygon_.vertex(0);
    for (const auto& v : polygon_.vertices()) {
        bmin = bmin.cwiseMin(v);
        bmax = bmax.cwiseMax(v);
        take(v);
    }
    constexpr int n = 200;
    for (int i = 0; i <= n; ++i)
        for (int j = 0; j <= n; ++j) {
            const Vec2 p(bmin.x() + (bmax.x() - bmin.x()) * i / n, bmin.y() + (bmax.y() - bmin.y()) * j / n);
            if (polygon_.contains(p)) take(p);
        }
    for (std::size_t k = 0; k < polygon_.size(); ++k)
        for (int i = 0; i < n; ++i) {
            const double t = static_cast<double>(i) / n;
            take((1 - t) * polygon_.vertex(k) + t * polygon_.vertex(k + 1));
        }
    range_ = std::make_pair(lo, hi);
    return *range_;
}

// ---------------------------------------------------------------------------

QuadraticTension::QuadraticTension(GradientPolygon polygon, double weight, Vec2 center)
    : TensionModel(std::move(polygon)), weight_(weight), center_(std::move(center)) {
    if (!(weight_ > 0)) throw ConfigError("quadratic tension weight must be positive");
}

TensionSample QuadraticTension::evaluate(const Vec2& p, int order) const {
    TensionSample s;
    const Vec2 d = p - center_;
    s.value = weight_ * d.squaredNorm();
    if (order >= 1) s.gradient = 2.0 * weight_ * d;
    if (order >= 2) s.hessian = 2.0 * weight_ * Mat2::Identity();
    return s;
}

// ---------------------------------------------------------------------------

LozengeTension::LozengeTension(GradientPolygon triangle) : TensionModel(std::move(triangle)) {
    const auto& N = polygon();
    if (N.size() != 3) throw ConfigError("lozenge tension requires a triangular gradient polygon");
    // λ_k(p) = bary_grad_k . p + bary_const_k, with λ_k(p_j) = δ_kj.
    Eigen::Matrix3d A;
    for (int j = 0; j < 3; ++j) A.col(j) << N.vertex(j).x(), N.vertex(j).y(), 1.0;
    const Eigen::Matrix3d inv = A.inverse();
    for (int k = 0; k < 3; ++k) {
        bary_grad_[k] = Vec2(inv(k, 0), inv(k, 1));
        bary_const_[k] = inv(k, 2);
    }
}

std::array<double, 3> LozengeTension::proportions(const Vec2& p) const {
    std::array<double, 3> a{};
    for (int k = 0; k < 3; ++k) a[k] = std::clamp(bary_grad_[k].dot(p) + bary_const_[k], 0.0, 1.0);
    return a;
}

TensionSample LozengeTension::evaluate(const Vec2& p, int order) const {
    const auto a = proportions(p);
    TensionSample s;
    for (int k = 0; k < 3; ++k) s.value -= lobachevsky(pi * a[k]) / pi;
    if (order >= 1) {
        for (int k = 0; k < 3; ++k)
            if (a[k] <= 0.0 || a[k] >= 1.0)
                throw OutsideDomainError("lozenge tension derivatives are unbounded on the boundary of N");
        for (int k = 0; k < 3; ++k) s.gradient += std::log(2.0 * std::sin(pi * a[k])) * bary_grad_[k];
    }
    if (order >= 2)
        for (int k = 0; k < 3; ++k)
            s.hessian += pi / std::tan(pi * a[k]) * bary_grad_[k] * bary_grad_[k].transpose();
    return s;
}

// ---------------------------------------------------------------------------

namespace {
std::vector<Vec2> term_points(const std::vector<SingularTerm>& terms) {
    std::vector<Vec2> out;
    for (const auto& t : terms) out.push_back(t.point);
    return out;
}
}  // namespace

CustomSingularTension::CustomSingularTension(GradientPolygon polygon, std::vector<SingularTerm> terms,
                                             double base_weight, double singular_radius)
    : TensionModel(std::move(polygon), term_points(terms), singular_radius), terms_(std::move(terms)),
      base_(base_weight) {
    if (!(base_ > 0)) throw ConfigError("custom-singular base weight must be positive");
    for (const auto& t : terms_) {
        if (!(t.exponent > 0 && t.exponent < 1)) throw ConfigError("singularity exponent must lie in (0,1)");
        if (!(t.weight >= 0)) throw ConfigError("singularity weight must be nonnegative");
    }
}

TensionSample CustomSingularTension::evaluate(const Vec2& p, int order) const {
    TensionSample s;
    s.value = base_ * p.squaredNorm();
    if (order >= 1) s.gradient = 2.0 * base_ * p;
    if (order >= 2) s.hessian = 2.0 * base_ * Mat2::Identity();
    for (const auto& t : terms_) {
        const Vec2 d = p - t.point;
        const double r = d.norm();
        s.value += t.weight * std::pow(r, 1.0 + t.exponent);
        if (r == 0.0) continue;
        if (order >= 1) s.gradient += t.weight * (1.0 + t.exponent) * std::pow(r, t.exponent - 1.0) * d;
        if (order >= 2) {
            const Vec2 u = d / r;
            s.hessian += t.weight * (1.0 + t.exponent) * std::pow(r, t.exponent - 1.0) *
                         (Mat2::Identity() + (t.exponent - 1.0) * u * u.transpose());
        }
    }
    return s;
}

// ---------------------------------------------------------------------------
// PenalizedTension
// ---------------------------------------------------------------------------

PenalizedTension::PenalizedTension(std::shared_ptr<const TensionModel> base, int m, const PenaltySchedule& schedule)
    : base_(std::move(base)), m_(m) {
    if (m < 1) throw ConfigError("penalty index m must be >= 1");
    if (!(schedule.radius_factor > 0 && schedule.radius_factor <= 0.5))
        throw ConfigError("radius_factor must lie in (0, 0.5]");
    const double depth = polygon().interior_depth();
    const double scale = std::ldexp(1.0, -m);
    radius_ = schedule.radius_factor * scale * depth;
    kappa_ = 2.0 * radius_ / depth;
    eps_m_ = std::pow(schedule.convexity_floor_base, -m);
    const auto [fmin, fmax] = base_->value_range();
    a0_ = fmin - 1.0;
    // a0 + C (r/2)^3 >= fmax + 2 tau keeps A above F_r by tau at the switch.
    const double needed = (fmax - a0_ + 2.0 * tau_) * 8.0 / (radius_ * radius_ * radius_);
    c_m_ = std::max(std::pow(4.0, m), needed);
}

double PenalizedTension::penalty(const Vec2& p) const {
    const auto& N = polygon();
    double sum = 0.0;
    for (std::size_t i = 0; i < N.size(); ++i) {
        const double e = N.outward_normal(i).dot(p) - N.offset(i);
        if (e > 0) sum += e * e * e;
    }
    return c_m_ * sum;
}

TensionSample PenalizedTension::barrier(const Vec2& p, int order) const {
    const auto& N = polygon();
    TensionSample s;
    s.value = a0_;
    for (std::size_t i = 0; i < N.size(); ++i) {
        const Vec2& n = N.outward_normal(i);
        const double e = n.dot(p) - N.offset(i);
        if (e <= 0) continue;
        s.value += c_m_ * e * e * e;
        if (order >= 1) s.gradient += 3.0 * c_m_ * e * e * n;
        if (order >= 2) s.hessian += 6.0 * c_m_ * e * n * n.transpose();
    }
    return s;
}

TensionSample PenalizedTension::mollified(const Vec2& p, int order) const {
    const Vec2& z0 = polygon().interior_point();
    const double shrink = 1.0 - kappa_;
    const Vec2 centre = z0 + shrink * (p - z0);
    const double ring = radius_ / std::numbers::sqrt2;
    TensionSample s;
    for (int k = 0; k < 8; ++k) {
        const double a = 2.0 * pi * k / 8.0;
        const TensionSample f = base_->eval(centre + ring * Vec2(std::cos(a), std::sin(a)), order);
        s.value += f.value;
        s.gradient += f.gradient;
        s.hessian += f.hessian;
    }
    s.value /= 8.0;
    s.gradient *= shrink / 8.0;
    s.hessian *= shrink * shrink / 8.0;
    return s;
}

TensionSample PenalizedTension::eval(const Vec2& p, int order) const {
    TensionSample g = barrier(p, order);
    if (polygon().gauge_excess(p) < 0.5 * radius_) {
        const TensionSample f = mollified(p, order);
        // smax(x, y) = (x+y)/2 + s((x-y)/2), s a C^2 convex |.| smoothed on [-tau, tau].
        const double z = 0.5 * (f.value - g.value);
        double s = std::abs(z), ds = z >= 0 ? 1.0 : -1.0, dds = 0.0;
        if (std::abs(z) < tau_) {
            const double x = z / tau_;
            s = tau_ * (-x * x * x * x + 6.0 * x * x + 3.0) / 8.0;
            ds = 0.5 * (3.0 * x - x * x * x);
            dds = 1.5 * (1.0 - x * x) / tau_;
        }
        const double wf = 0.5 * (1.0 + ds);
        const double wg = 0.5 * (1.0 - ds);
        TensionSample out;
        out.value = 0.5 * (f.value + g.value) + s;
        if (order >= 1) out.gradient = wf * f.gradient + wg * g.gradient;
        if (order >= 2) {
            const Vec2 diff = f.gradient - g.gradient;
            out.hessian = wf * f.hessian + wg * g.hessian + 0.25 * dds * diff * diff.transpose();
        }
        g = out;
    }
    g.value += eps_m_ * p.squaredNorm();
    if (order >= 1) g.gradient += 2.0 * eps_m_ * p;
    if (order >= 2) g.hessian += 2.0 * eps_m_ * Mat2::Identity();
    return g;
}

// ---------------------------------------------------------------------------
// Legendre transform
// ---------------------------------------------------------------------------

LegendreResult legendre(const ConvexFunction& f, const Vec2& q, double tol, const Vec2& start, int max_iterations) {
    Vec2 p = start;
    auto objective = [&](const Vec2& x) { return f(x, 0).value - q.dot(x); };
    for (int it = 0; it < max_iterations; ++it) {
        const TensionSample s = f(p, 2);
        const Vec2 g = s.gradient - q;
        const Vec2 step = -s.hessian.ldlt().solve(g);
        const double decrement = -g.dot(step);
        const bool small_gradient = g.norm() <= 1e-10 * (1.0 + q.norm());
        if ((decrement <= 2.0 * tol && small_gradient) || g.norm() <= 1e-15 * (1.0 + q.norm())) {
            return {q.dot(p) - s.value, p, it};
        }
        const double phi0 = s.value - q.dot(p);
        double alpha = 1.0;
        while (alpha > 1e-12 && objective(p + alpha * step) > phi0 - 1e-4 * alpha * decrement) alpha *= 0.5;
        p += alpha * step;
    }
    throw NonConvergenceError("legendre transform did not converge");
}

LegendreResult legendre(const PenalizedTension& model, const Vec2& q, double tol) {
    return legendre([&](const Vec2& p, int order) { return model.eval(p, order); }, q, tol,
                    model.polygon().interior_point());
}

// ---------------------------------------------------------------------------
// Sampled probes
// ---------------------------------------------------------------------------

SampleRegion SampleRegion::disk(const Vec2& center, double radius) {
    return {[center, radius](const Vec2& p) { return (p - center).norm() <= radius; },
            center - Vec2(radius, radius), center + Vec2(radius, radius)};
}

SampleRegion SampleRegion::annulus(const Vec2& center, double inner, double outer) {
    return {[=](const Vec2& p) {
                const double r = (p - center).norm();
                return r >= inner && r <= outer;
            },
            center - Vec2(outer, outer), center + Vec2(outer, outer)};
}

SampleRegion SampleRegion::inset(const GradientPolygon& polygon, double min_depth) {
    Vec2 lo = polygon.vertex(0), hi = polygon.vertex(0);
    for (const auto& v : polygon.vertices()) {
        lo = lo.cwiseMin(v);
        hi = hi.cwiseMax(v);
    }
    return {[polygon, min_depth](const Vec2& p) { return -polygon.gauge_excess(p) >= min_depth; }, lo, hi};
}

HessianBounds hessian_bounds(const TensionModel& model, const SampleRegion& region, std::size_t samples) {
    for (const auto& q : model.singular_points()) {
        if (region.contains(q)) throw SingularPointError("sample region contains a singular point");
    }
    const Vec2 ext = region.hi - region.lo;
    const double step = std::sqrt(std::max(ext.x() * ext.y(), 1e-300) / static_cast<double>(std::max<std::size_t>(samples, 1)));
    const int nx = std::max(1, static_cast<int>(std::ceil(ext.x() / step)));
    const int ny = std::max(1, static_cast<int>(std::ceil(ext.y() / step)));
    HessianBounds out{std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity(), 0};
    for (int i = 0; i <= nx; ++i)
        for (int j = 0; j <= ny; ++j) {
            const Vec2 p = region.lo + Vec2(ext.x() * i / nx, ext.y() * j / ny);
            if (!region.contains(p)) continue;
            const Mat2 h = model.eval(p, 2).hessian;
            const Eigen::SelfAdjointEigenSolver<Mat2> es(h, Eigen::EigenvaluesOnly);
            out.lambda_min = std::min(out.lambda_min, es.eigenvalues()(0));
            out.lambda_max = std::max(out.lambda_max, es.eigenvalues()(1));
            ++out.samples;
        }
    return out;
}

double convexity_gap_probe(const TensionModel& model, double delta, std::size_t pairs, std::uint64_t seed) {
    const auto& N = model.polygon();
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    double best = std::numeric_limits<double>::infinity();
    std::size_t found = 0;
    for (std::size_t tries = 0; found < pairs && tries < 100 * pairs; ++tries) {
        // Uniform point of N by rejection from the vertex box.
        Vec2 lo = N.vertex(0), hi = N.vertex(0);
        for (const auto& v : N.vertices()) {
            lo = lo.cwiseMin(v);
            hi = hi.cwiseMax(v);
        }
        const Vec2 p = lo + Vec2(unit(rng) * (hi - lo).x(), unit(rng) * (hi - lo).y());
        const double a = 2.0 * pi * unit(rng);
        const Vec2 q = p + delta * Vec2(std::cos(a), std::sin(a));
        if (N.gauge_excess(p) >= -1e-9 || N.gauge_excess(q) >= -1e-9) continue;
        const TensionSample fp = model.eval(p, 1);
        const double gap = model.eval(q, 0).value - fp.value - fp.gradient.dot(q - p);
        best = std::min(best, gap);
        ++found;
    }
    return best;
}

std::shared_ptr<const TensionModel> make_tension(const std::string& name, GradientPolygon polygon, double weight,
                                                 std::vector<SingularTerm> terms) {
    if (name == "quadratic") return std::make_shared<QuadraticTension>(std::move(polygon), weight);
    if (name == "lozenge") return std::make_shared<LozengeTension>(std::move(polygon));
    if (name == "custom-singular")
        return std::make_shared<CustomSingularTension>(std::move(polygon), std::move(terms), weight);
    throw ConfigError("unknown tension model '" + name + "'");
}

}  // namespace limitshape
