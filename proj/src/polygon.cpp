#include "limitshape/polygon.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <limits>
#include <numbers>

namespace limitshape {

GradientPolygon::GradientPolygon(std::vector<Vec2> vertices) : vertices_(std::move(vertices)) {
    if (vertices_.size() < 3) throw ConfigError("gradient polygon needs at least 3 vertices");
    if (signed_area(vertices_) < 0.0) {
        std::cerr << "warning: gradient polygon given clockwise; reversed to counterclockwise\n";
        std::reverse(vertices_.begin(), vertices_.end());
    }
    Vec2 c = Vec2::Zero();
    for (const auto& v : vertices_) c += v;
    z0_ = c / static_cast<double>(vertices_.size());
    build();
}

GradientPolygon::GradientPolygon(std::vector<Vec2> vertices, const Vec2& interior_point)
    : GradientPolygon(std::move(vertices)) {
    z0_ = interior_point;
    build();
}

GradientPolygon GradientPolygon::square(double half_width) {
    const double a = half_width;
    return GradientPolygon({{-a, -a}, {a, -a}, {a, a}, {-a, a}});
}

GradientPolygon GradientPolygon::lozenge_triangle() {
    const double s = 1.0 / std::sqrt(3.0);
    return GradientPolygon({{-2.0 / 3.0, 0.0}, {1.0 / 3.0, -s}, {1.0 / 3.0, s}}, Vec2::Zero());
}

void GradientPolygon::build() {
    const std::size_t n = vertices_.size();
    normals_.resize(n);
    offsets_.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        const Vec2& a = vertices_[i];
        const Vec2& b = vertices_[(i + 1) % n];
        const Vec2& c = vertices_[(i + 2) % n];
        if (cross(b - a, c - b) <= 0.0)
            throw ConfigError("gradient polygon vertices are not in strictly convex position");
        const Vec2 e = b - a;
        const double len = e.norm();
        if (len <= kGeomTol) throw ConfigError("gradient polygon has a repeated vertex");
        normals_[i] = Vec2(e.y(), -e.x()) / len;
        offsets_[i] = normals_[i].dot(a);
    }
    depth_ = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < n; ++i) depth_ = std::min(depth_, offsets_[i] - normals_[i].dot(z0_));
    if (!(depth_ > kGeomTol)) throw ConfigError("interior point of gradient polygon is not strictly inside");
    min_side_depth_ = depth_;
    diameter_ = 0.0;
    for (const auto& a : vertices_)
        for (const auto& b : vertices_) diameter_ = std::max(diameter_, (a - b).norm());
}

double GradientPolygon::support(const Vec2& d) const {
    double best = -std::numeric_limits<double>::infinity();
    for (const auto& v : vertices_) best = std::max(best, v.dot(d));
    return best;
}

double GradientPolygon::gauge_excess(const Vec2& p) const {
    double best = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < normals_.size(); ++i) best = std::max(best, normals_[i].dot(p) - offsets_[i]);
    return best;
}

std::vector<double> GradientPolygon::side_excesses(const Vec2& p) const {
    std::vector<double> out(normals_.size());
    for (std::size_t i = 0; i < normals_.size(); ++i) out[i] = normals_[i].dot(p) - offsets_[i];
    return out;
}

Vec2 GradientPolygon::project(const Vec2& p) const {
    if (gauge_excess(p) <= 0.0) return p;
    Vec2 best = vertices_[0];
    double best_d = std::numeric_limits<double>::infinity();
    const std::size_t n = vertices_.size();
    for (std::size_t i = 0; i < n; ++i) {
        const Vec2 q = closest_point_on_segment(vertices_[i], vertices_[(i + 1) % n], p);
        const double d = (q - p).squaredNorm();
        if (d < best_d) {
            best_d = d;
            best = q;
        }
    }
    return best;
}

double GradientPolygon::boundary_distance(const Vec2& p) const {
    return std::max(0.0, -gauge_excess(p));
}

double GradientPolygon::radial_gauge(const Vec2& p) const {
    double rho = 0.0;
    for (std::size_t i = 0; i < normals_.size(); ++i) {
        const double d_i = offsets_[i] - normals_[i].dot(z0_);
        rho = std::max(rho, normals_[i].dot(p - z0_) / d_i);
    }
    return rho;
}

Vec3 GradientPolygon::h_map(const Vec2& p) const {
    const Vec2 q = project(p);
    const double rho = std::clamp(radial_gauge(q), 0.0, 1.0);
    if (rho >= 1.0 - kGeomTol) return {0.0, 0.0, -1.0};
    const Vec2 d = q - z0_;
    const double theta = std::atan2(d.y(), d.x());
    const double s = std::sin(std::numbers::pi * rho);
    return {s * std::cos(theta), s * std::sin(theta), std::cos(std::numbers::pi * rho)};
}

double GradientPolygon::h_lipschitz() const { return 2.0 * std::numbers::pi / min_side_depth_; }

Vec2 GradientPolygon::vertex_cone_direction(std::size_t i) const {
    const std::size_t n = vertices_.size();
    const Vec2& p = vertices_[i % n];
    const Vec2 a = (vertices_[(i + 1) % n] - p).normalized();
    const Vec2 b = (vertices_[(i + n - 1) % n] - p).normalized();
    return (a + b).normalized();
}

GradientPolygon GradientPolygon::scaled(double factor) const {
    std::vector<Vec2> v;
    v.reserve(vertices_.size());
    for (const auto& p : vertices_) v.push_back(z0_ + factor * (p - z0_));
    return GradientPolygon(std::move(v), z0_);
}

// ---------------------------------------------------------------------------

double signed_area(std::span<const Vec2> loop) {
    double a = 0.0;
    for (std::size_t i = 0; i < loop.size(); ++i) a += cross(loop[i], loop[(i + 1) % loop.size()]);
    return 0.5 * a;
}

Vec2 closest_point_on_segment(const Vec2& a, const Vec2& b, const Vec2& p) {
    const Vec2 e = b - a;
    const double l2 = e.squaredNorm();
    if (l2 == 0.0) return a;
    const double t = std::clamp((p - a).dot(e) / l2, 0.0, 1.0);
    return a + t * e;
}

double distance_to_loop(std::span<const Vec2> loop, const Vec2& p) {
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < loop.size(); ++i) {
        const Vec2 q = closest_point_on_segment(loop[i], loop[(i + 1) % loop.size()], p);
        best = std::min(best, (q - p).norm());
    }
    return best;
}

bool point_in_polygon(std::span<const Vec2> loop, const Vec2& p, double tol) {
    if (distance_to_loop(loop, p) <= tol) return true;
    bool inside = false;
    const std::size_t n = loop.size();
    for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
        const Vec2& a = loop[i];
        const Vec2& b = loop[j];
        if ((a.y() > p.y()) != (b.y() > p.y())) {
            const double x = a.x() + (p.y() - a.y()) * (b.x() - a.x()) / (b.y() - a.y());
            if (p.x() < x) inside = !inside;
        }
    }
    return inside;
}

namespace {
int orient(const Vec2& a, const Vec2& b, const Vec2& c) {
    const double v = cross(b - a, c - a);
    const double scale = std::max({(b - a).norm(), (c - a).norm(), 1.0});
    if (std::abs(v) <= 1e-14 * scale * scale) return 0;
    return v > 0 ? 1 : -1;
}

bool on_segment(const Vec2& a, const Vec2& b, const Vec2& p) {
    return std::min(a.x(), b.x()) - 1e-14 <= p.x() && p.x() <= std::max(a.x(), b.x()) + 1e-14 &&
           std::min(a.y(), b.y()) - 1e-14 <= p.y() && p.y() <= std::max(a.y(), b.y()) + 1e-14;
}
}  // namespace

bool segments_cross(const Vec2& a, const Vec2& b, const Vec2& c, const Vec2& d) {
    const int o1 = orient(a, b, c), o2 = orient(a, b, d), o3 = orient(c, d, a), o4 = orient(c, d, b);
    return o1 * o2 < 0 && o3 * o4 < 0;
}

bool segments_intersect(const Vec2& a, const Vec2& b, const Vec2& c, const Vec2& d) {
    const int o1 = orient(a, b, c), o2 = orient(a, b, d), o3 = orient(c, d, a), o4 = orient(c, d, b);
    if (o1 * o2 < 0 && o3 * o4 < 0) return true;
    if (o1 == 0 && on_segment(a, b, c)) return true;
    if (o2 == 0 && on_segment(a, b, d)) return true;
    if (o3 == 0 && on_segment(c, d, a)) return true;
    if (o4 == 0 && on_segment(c, d, b)) return true;
    return false;
}

bool is_simple_loop(std::span<const Vec2> loop) {
    const std::size_t n = loop.size();
    if (n < 3) return false;
    if (std::abs(signed_area(loop)) <= 1e-14) return false;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            const bool adjacent = j == i + 1 || (i == 0 && j == n - 1);
            const Vec2 &a = loop[i], &b = loop[(i + 1) % n], &c = loop[j], &d = loop[(j + 1) % n];
            if (adjacent) {
                // Adjacent edges may only share their common vertex.
                const Vec2& shared = (j == i + 1) ? b : a;
                const Vec2& far1 = (j == i + 1) ? a : b;
                const Vec2& far2 = (j == i + 1) ? d : c;
                if (orient(shared, far1, far2) == 0 && (far1 - shared).dot(far2 - shared) > 0) return false;
                continue;
            }
            if (segments_intersect(a, b, c, d)) return false;
        }
    }
    return true;
}

bool is_convex_loop(std::span<const Vec2> loop) {
    const std::size_t n = loop.size();
    const double s = signed_area(loop) > 0 ? 1.0 : -1.0;
    for (std::size_t i = 0; i < n; ++i) {
        const Vec2& a = loop[i];
        const Vec2& b = loop[(i + 1) % n];
        const Vec2& c = loop[(i + 2) % n];
        if (s * cross(b - a, c - b) < -1e-14) return false;
    }
    return true;
}

bool segment_inside(std::span<const Vec2> loop, const Vec2& a, const Vec2& b) {
    const std::size_t n = loop.size();
    std::vector<double> ts{0.0, 1.0};
    const Vec2 e = b - a;
    for (std::size_t i = 0; i < n; ++i) {
        const Vec2& c = loop[i];
        const Vec2& d = loop[(i + 1) % n];
        if (segments_cross(a, b, c, d)) return false;
        // Parameters where the segment meets edge endpoints or crosses edge lines.
        const Vec2 f = d - c;
        const double den = cross(e, f);
        if (std::abs(den) > 1e-15) {
            const double t = cross(c - a, f) / den;
            if (t > 0.0 && t < 1.0) ts.push_back(t);
        }
        const double l2 = e.squaredNorm();
        if (l2 > 0) {
            const double t = (c - a).dot(e) / l2;
            if (t > 0.0 && t < 1.0) ts.push_back(t);
        }
    }
    std::sort(ts.begin(), ts.end());
    for (std::size_t k = 0; k + 1 < ts.size(); ++k) {
        const Vec2 mid = a + 0.5 * (ts[k] + ts[k + 1]) * e;
        if (!point_in_polygon(loop, mid, 1e-10)) return false;
    }
    return true;
}

}  // namespace limitshape
