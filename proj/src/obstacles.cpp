#include "limitshape/obstacles.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace limitshape {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();

std::vector<Vec2> open_loop(const std::vector<Vec2>& polyline) {
    return {polyline.begin(), polyline.end() - 1};
}

// Drops vertices where the loop goes straight on.
std::vector<Vec2> corners(const std::vector<Vec2>& loop) {
    std::vector<Vec2> out;
    const std::size_t n = loop.size();
    for (std::size_t i = 0; i < n; ++i) {
        const Vec2& a = loop[(i + n - 1) % n];
        const Vec2& b = loop[i];
        const Vec2& c = loop[(i + 1) % n];
        const Vec2 u = b - a, v = c - b;
        if (std::abs(cross(u, v)) > 1e-12 * u.norm() * v.norm() || u.dot(v) < 0) out.push_back(b);
    }
    return out;
}
}  // namespace

// ---------------------------------------------------------------------------
// BoundaryData
// ---------------------------------------------------------------------------

BoundaryData BoundaryData::from_function(std::vector<Vec2> polyline, const std::function<double(const Vec2&)>& f,
                                         double sample_density) {
    if (!polyline.empty() && (polyline.front() - polyline.back()).norm() > kGeomTol)
        polyline.push_back(polyline.front());
    BoundaryData d;
    d.polyline = std::move(polyline);
    for (const auto& y : d.polyline) d.values.push_back(f(y));
    d.sample_density = sample_density;
    return d;
}

BoundaryData BoundaryData::linear(std::vector<Vec2> polyline, const Vec2& p, double c) {
    return from_function(std::move(polyline), [&](const Vec2& y) { return p.dot(y) + c; });
}

void BoundaryData::validate() const {
    if (polyline.size() < 4) throw MalformedBoundaryError("boundary polyline needs at least three distinct vertices");
    if (values.size() != polyline.size())
        throw MalformedBoundaryError("boundary values and polyline vertices differ in count");
    if ((polyline.front() - polyline.back()).norm() > kGeomTol)
        throw MalformedBoundaryError("boundary polyline is open (last vertex must repeat the first)");
    if (std::abs(values.front() - values.back()) > 1e-12 * (1.0 + std::abs(values.front())))
        throw MalformedBoundaryError("boundary values disagree at the closing vertex");
    for (double v : values)
        if (!std::isfinite(v)) throw MalformedBoundaryError("boundary value is not finite");
    if (!is_simple_loop(open_loop(polyline))) throw MalformedBoundaryError("boundary polyline self-intersects");
    if (sample_density < 0) throw MalformedBoundaryError("sample density must be nonnegative");
}

double BoundaryData::perimeter() const {
    double L = 0.0;
    for (std::size_t i = 0; i + 1 < polyline.size(); ++i) L += (polyline[i + 1] - polyline[i]).norm();
    return L;
}

double BoundaryData::step() const { return sample_density > 0 ? sample_density : perimeter() / 400.0; }

double BoundaryData::value_on_side(std::size_t i, double t) const { return (1 - t) * values[i] + t * values[i + 1]; }

double BoundaryData::value_at(const Vec2& y) const {
    double best = kInf, v = values[0];
    for (std::size_t i = 0; i + 1 < polyline.size(); ++i) {
        const Vec2 q = closest_point_on_segment(polyline[i], polyline[i + 1], y);
        const double d = (q - y).norm();
        if (d < best) {
            best = d;
            const double len2 = (polyline[i + 1] - polyline[i]).squaredNorm();
            const double t = len2 > 0 ? (q - polyline[i]).dot(polyline[i + 1] - polyline[i]) / len2 : 0.0;
            v = value_on_side(i, t);
        }
    }
    return v;
}

std::vector<std::pair<Vec2, double>> BoundaryData::samples() const {
    std::vector<std::pair<Vec2, double>> out;
    const double s = step();
    for (std::size_t i = 0; i + 1 < polyline.size(); ++i) {
        const int pieces = std::max(1, static_cast<int>(std::ceil((polyline[i + 1] - polyline[i]).norm() / s)));
        for (int k = 0; k < pieces; ++k) {
            const double t = static_cast<double>(k) / pieces;
            out.emplace_back((1 - t) * polyline[i] + t * polyline[i + 1], value_on_side(i, t));
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Obstacles
// ---------------------------------------------------------------------------

Obstacles::Obstacles(BoundaryData data, GradientPolygon N) : Obstacles(std::move(data), std::move(N), false) {}

Obstacles::Obstacles(BoundaryData data, GradientPolygon N, bool skip_check)
    : data_(std::move(data)), N_(std::move(N)) {
    data_.validate();
    samples_ = data_.samples();
    outline_ = corners(open_loop(data_.polyline));
    const auto& loop = outline_;
    convex_ = is_convex_loop(loop);
    if (!convex_) {
        const double orientation = signed_area(loop) > 0 ? 1.0 : -1.0;
        const std::size_t n = loop.size();
        for (std::size_t i = 0; i < n; ++i) {
            const Vec2& a = loop[(i + n - 1) % n];
            const Vec2& b = loop[i];
            const Vec2& c = loop[(i + 1) % n];
            if (orientation * cross(b - a, c - b) < -1e-14) reflex_.push_back(b);
        }
        const std::size_t r = reflex_.size();
        graph_.assign(r, std::vector<double>(r, kInf));
        for (std::size_t i = 0; i < r; ++i)
            for (std::size_t j = 0; j < r; ++j)
                graph_[i][j] = i == j ? 0.0 : visible(reflex_[i], reflex_[j]) ? N_.support(reflex_[j] - reflex_[i]) : kInf;
        for (std::size_t k = 0; k < r; ++k)
            for (std::size_t i = 0; i < r; ++i)
                for (std::size_t j = 0; j < r; ++j) graph_[i][j] = std::min(graph_[i][j], graph_[i][k] + graph_[k][j]);
        std::vector<double> up0(r, kInf), low0(r, -kInf);
        for (std::size_t w = 0; w < r; ++w)
            for (const auto& [y, phi] : samples_) {
                if (!visible(y, reflex_[w])) continue;
                up0[w] = std::min(up0[w], phi + N_.support(reflex_[w] - y));
                low0[w] = std::max(low0[w], phi - N_.support(y - reflex_[w]));
            }
        up_reflex_.assign(r, kInf);
        low_reflex_.assign(r, -kInf);
        for (std::size_t w = 0; w < r; ++w)
            for (std::size_t v = 0; v < r; ++v) {
                up_reflex_[w] = std::min(up_reflex_[w], up0[v] + graph_[v][w]);
                low_reflex_[w] = std::max(low_reflex_[w], low0[v] - graph_[w][v]);
            }
    }
    if (!skip_check) {
        const auto a = check();
        if (!a.valid) {
            std::ostringstream msg;
            msg << "boundary data is not admissible: slack " << a.slack << " between (" << a.y1.x() << ", "
                << a.y1.y() << ") and (" << a.y2.x() << ", " << a.y2.y() << ")";
            throw InadmissibleError(msg.str());
        }
    }
}

bool Obstacles::visible(const Vec2& a, const Vec2& b) const {
    return segment_inside(outline_, a, b);
}

double Obstacles::distance(const Vec2& a, const Vec2& b) const {
    if (convex_ || visible(a, b)) return N_.support(b - a);
    double best = kInf;
    const std::size_t r = reflex_.size();
    std::vector<double> from_a(r, kInf), to_b(r, kInf);
    for (std::size_t w = 0; w < r; ++w) {
        if (visible(a, reflex_[w])) from_a[w] = N_.support(reflex_[w] - a);
        if (visible(reflex_[w], b)) to_b[w] = N_.support(b - reflex_[w]);
    }
    for (std::size_t v = 0; v < r; ++v)
        for (std::size_t w = 0; w < r; ++w) best = std::min(best, from_a[v] + graph_[v][w] + to_b[w]);
    return best;
}

std::pair<double, Vec2> Obstacles::upper_with_arg(const Vec2& x) const {
    double best = kInf;
    Vec2 arg = data_.polyline[0];
    auto take = [&](double v, const Vec2& y) {
        if (v < best) {
            best = v;
            arg = y;
        }
    };
    if (convex_) {
        const std::size_t n = N_.size();
        for (std::size_t i = 0; i + 1 < data_.polyline.size(); ++i) {
            const Vec2& a = data_.polyline[i];
            const Vec2 e = data_.polyline[i + 1] - a;
            auto eval = [&](double t) {
                const Vec2 y = a + t * e;
                take(data_.value_on_side(i, t) + N_.support(x - y), y);
            };
            eval(0.0);
            eval(1.0);
            // support(x - y(t)) kinks where x - y(t) is normal to a side of N.
            for (std::size_t k = 0; k < n; ++k) {
                const Vec2 side = N_.vertex(k + 1) - N_.vertex(k);
                const double den = e.dot(side);
                if (std::abs(den) < 1e-300) continue;
                const double t = (x - a).dot(side) / den;
                if (t > 0.0 && t < 1.0) eval(t);
            }
        }
        return {best, arg};
    }
    for (const auto& [y, phi] : samples_)
        if (visible(y, x)) take(phi + N_.support(x - y), y);
    for (std::size_t w = 0; w < reflex_.size(); ++w)
        if (visible(reflex_[w], x)) take(up_reflex_[w] + N_.support(x - reflex_[w]), reflex_[w]);
    return {best, arg};
}

double Obstacles::upper(const Vec2& x) const { return upper_with_arg(x).first; }

double Obstacles::lower(const Vec2& x) const {
    double best = -kInf;
    if (convex_) {
        const std::size_t n = N_.size();
        for (std::size_t i = 0; i + 1 < data_.polyline.size(); ++i) {
            const Vec2& a = data_.polyline[i];
            const Vec2 e = data_.polyline[i + 1] - a;
            auto eval = [&](double t) { best = std::max(best, data_.value_on_side(i, t) - N_.support(a + t * e - x)); };
            eval(0.0);
            eval(1.0);
            for (std::size_t k = 0; k < n; ++k) {
                const Vec2 side = N_.vertex(k + 1) - N_.vertex(k);
                const double den = e.dot(side);
                if (std::abs(den) < 1e-300) continue;
                const double t = (x - a).dot(side) / den;
                if (t > 0.0 && t < 1.0) eval(t);
            }
        }
        return best;
    }
    for (const auto& [y, phi] : samples_)
        if (visible(x, y)) best = std::max(best, phi - N_.support(y - x));
    for (std::size_t w = 0; w < reflex_.size(); ++w)
        if (visible(x, reflex_[w])) best = std::max(best, low_reflex_[w] - N_.support(reflex_[w] - x));
    return best;
}

Admissibility Obstacles::check() const {
    double scale = 1.0;
    for (double v : data_.values) scale = std::max(scale, std::abs(v));
    Admissibility out;
    out.slack = -kInf;
    for (const auto& [y1, phi] : samples_) {
        const auto [u, y2] = upper_with_arg(y1);
        const double slack = phi - u;
        if (slack > out.slack) {
            out.slack = slack;
            out.y1 = y1;
            out.y2 = y2;
        }
    }
    out.valid = out.slack <= 1e-9 * scale;
    return out;
}

Admissibility check_admissible(const BoundaryData& data, const GradientPolygon& N) {
    return Obstacles(data, N, true).check();
}

std::pair<double, double> obstacle_pair(const BoundaryData& data, const GradientPolygon& N, const Vec2& x) {
    return Obstacles(data, N).pair(x);
}

}  // namespace limitshape
