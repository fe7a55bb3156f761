#include "limitshape/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <numeric>

#include <Eigen/Eigenvalues>

namespace limitshape {

namespace {

void require_window(const TriMesh& mesh, const Disk& w) {
    if (!(w.radius > 0)) throw WindowOutsideDomainError("window radius must be positive");
    if (!point_in_polygon(mesh.outline, w.center, 0.0) || mesh.boundary_distance(w.center) < w.radius - 1e-12)
        throw WindowOutsideDomainError("window is not contained in the domain");
}

bool in_window(const TriMesh& mesh, int t, const Disk& w) { return (mesh.centroid(t) - w.center).norm() <= w.radius; }

// P1 gradient of nodal values on triangle t.
template <class Values>
Vec2 p1_gradient(const TriMesh& mesh, int t, const Values& v) {
    const auto& tri = mesh.triangles[t];
    Vec2 g = Vec2::Zero();
    for (int k = 0; k < 3; ++k) g += v[tri[k]] * mesh.hat_gradient(t, k);
    return g;
}

struct EdgeTriangles {
    int a, b;  // nodes, a < b
    int t1, t2;  // t2 = -1 on the boundary
};

std::vector<EdgeTriangles> mesh_edges(const TriMesh& mesh) {
    std::map<std::pair<int, int>, std::pair<int, int>> m;
    for (std::size_t t = 0; t < mesh.triangle_count(); ++t)
        for (int k = 0; k < 3; ++k) {
            const int a = mesh.triangles[t][k], b = mesh.triangles[t][(k + 1) % 3];
            auto [it, fresh] = m.try_emplace({std::min(a, b), std::max(a, b)}, static_cast<int>(t), -1);
            if (!fresh) it->second.second = static_cast<int>(t);
        }
    std::vector<EdgeTriangles> out;
    out.reserve(m.size());
    for (const auto& [e, ts] : m) out.push_back({e.first, e.second, ts.first, ts.second});
    return out;
}

// Andrew's monotone chain; returns hull vertices counterclockwise.
std::vector<Vec2> convex_hull(std::vector<Vec2> p) {
    std::sort(p.begin(), p.end(), [](const Vec2& a, const Vec2& b) { return a.x() < b.x() || (a.x() == b.x() && a.y() < b.y()); });
    p.erase(std::unique(p.begin(), p.end()), p.end());
    if (p.size() < 3) return p;
    std::vector<Vec2> h(2 * p.size());
    std::size_t k = 0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        while (k >= 2 && cross(h[k - 1] - h[k - 2], p[i] - h[k - 2]) <= 0) --k;
        h[k++] = p[i];
    }
    for (std::size_t i = p.size() - 1, t = k + 1; i > 0; --i) {
        while (k >= t && cross(h[k - 1] - h[k - 2], p[i - 1] - h[k - 2]) <= 0) --k;
        h[k++] = p[i - 1];
    }
    h.resize(k - 1);
    return h;
}

double diameter(const std::vector<Vec2>& pts) {
    const auto h = convex_hull(pts);
    double d = 0.0;
    for (std::size_t i = 0; i < h.size(); ++i)
        for (std::size_t j = i + 1; j < h.size(); ++j) d = std::max(d, (h[i] - h[j]).norm());
    return d;
}

double diameter(std::vector<Vec3> pts) {
    std::sort(pts.begin(), pts.end(), [](const Vec3& a, const Vec3& b) {
        return std::lexicographical_compare(a.data(), a.data() + 3, b.data(), b.data() + 3);
    });
    pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
    double d = 0.0;
    for (std::size_t i = 0; i < pts.size(); ++i)
        for (std::size_t j = i + 1; j < pts.size(); ++j) d = std::max(d, (pts[i] - pts[j]).norm());
    return d;
}

template <class Point>
Curve modulus_curve(const TriMesh& mesh, const std::vector<Point>& values, const std::vector<double>& radii,
                    std::size_t max_centres) {
    if (radii.empty()) throw ConfigError("modulus needs at least one radius");
    for (std::size_t k = 0; k < radii.size(); ++k)
        if (!(radii[k] > 0) || (k > 0 && !(radii[k] > radii[k - 1])))
            throw ConfigError("radii must be positive and increasing");
    const double rmax = radii.back();
    const std::size_t nt = mesh.triangle_count();
    std::vector<Vec2> c(nt);
    for (std::size_t t = 0; t < nt; ++t) c[t] = mesh.centroid(static_cast<int>(t));

    std::vector<int> centres;
    for (std::size_t t = 0; t < nt; ++t)
        if (mesh.boundary_distance(c[t]) >= rmax) centres.push_back(static_cast<int>(t));
    if (centres.empty()) throw WindowOutsideDomainError("no sample centre lies max(radii) inside the domain");
    const std::size_t stride = (centres.size() + max_centres - 1) / max_centres;

    // Bucket centroids on a grid of cell rmax.
    Vec2 lo = c[0];
    for (const auto& p : c) lo = lo.cwiseMin(p);
    std::map<std::pair<long, long>, std::vector<int>> grid;
    auto cell = [&](const Vec2& p) {
        return std::make_pair(static_cast<long>(std::floor((p.x() - lo.x()) / rmax)),
                              static_cast<long>(std::floor((p.y() - lo.y()) / rmax)));
    };
    for (std::size_t t = 0; t < nt; ++t) grid[cell(c[t])].push_back(static_cast<int>(t));

    Curve out;
    for (double r : radii) out.emplace_back(r, 0.0);
    for (std::size_t k = 0; k < centres.size(); k += stride) {
        const Vec2& x = c[centres[k]];
        std::vector<std::pair<double, int>> near;
        const auto [gi, gj] = cell(x);
        for (long a = gi - 1; a <= gi + 1; ++a)
            for (long b = gj - 1; b <= gj + 1; ++b) {
                auto it = grid.find({a, b});
                if (it == grid.end()) continue;
                for (int t : it->second) {
                    const double d = (c[t] - x).norm();
                    if (d <= rmax) near.emplace_back(d, t);
                }
            }
        std::sort(near.begin(), near.end());
        for (std::size_t ri = 0; ri < radii.size(); ++ri) {
            std::vector<Point> pts;
            for (const auto& [d, t] : near) {
                if (d > radii[ri]) break;
                pts.push_back(values[t]);
            }
            out[ri].second = std::max(out[ri].second, diameter(pts));
        }
    }
    return out;
}

// Largest amount by which points rise above their lower convex envelope.
double convex_violation(std::vector<Vec2> pts) {
    if (pts.size() < 3) return 0.0;
    std::sort(pts.begin(), pts.end(), [](const Vec2& a, const Vec2& b) { return a.x() < b.x() || (a.x() == b.x() && a.y() < b.y()); });
    std::vector<Vec2> hull;
    for (const auto& p : pts) {
        while (hull.size() >= 2 && cross(hull.back() - hull[hull.size() - 2], p - hull[hull.size() - 2]) <= 0)
            hull.pop_back();
        hull.push_back(p);
    }
    double worst = 0.0;
    std::size_t seg = 0;
    for (const auto& p : pts) {
        while (seg + 1 < hull.size() - 1 && hull[seg + 1].x() < p.x()) ++seg;
        double env = hull[seg].y();
        if (hull.size() >= 2) {
            const Vec2& a = hull[seg];
            const Vec2& b = hull[std::min(seg + 1, hull.size() - 1)];
            if (b.x() > a.x()) env = a.y() + (b.y() - a.y()) * (p.x() - a.x()) / (b.x() - a.x());
            else env = std::min(a.y(), b.y());
        }
        worst = std::max(worst, p.y() - env);
    }
    return worst;
}

struct UnionFind {
    std::vector<int> parent;
    explicit UnionFind(std::size_t n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
    int find(int x) {
        while (parent[x] != x) x = parent[x] = parent[parent[x]];
        return x;
    }
    void unite(int a, int b) {
        a = find(a);
        b = find(b);
        if (a != b) parent[std::max(a, b)] = std::min(a, b);
    }
};

}  // namespace

// ---------------------------------------------------------------------------
// Energies
// ---------------------------------------------------------------------------

double cutoff(double v, double c0, double c1) {
    const double t = std::clamp((v - c0) / (c1 - c0), 0.0, 1.0);
    return t * t * (3.0 - 2.0 * t);
}

std::vector<Vec2> recovered_gradient(const ScalarField& u) {
    const TriMesh& mesh = u.mesh();
    std::vector<Vec2> g(mesh.node_count(), Vec2::Zero());
    std::vector<double> w(mesh.node_count(), 0.0);
    for (std::size_t t = 0; t < mesh.triangle_count(); ++t) {
        const int ti = static_cast<int>(t);
        const Vec2 gt = u.gradient(ti);
        for (int k : mesh.triangles[t]) {
            g[k] += mesh.area(ti) * gt;
            w[k] += mesh.area(ti);
        }
    }
    for (std::size_t i = 0; i < g.size(); ++i) g[i] /= w[i];
    return g;
}

double caccioppoli_energy(const ScalarField& u, const CaccioppoliParams& params) {
    if (!(params.c1 > params.c0)) throw ConfigError("cutoff thresholds need c0 < c1");
    const TriMesh& mesh = u.mesh();
    require_window(mesh, params.window);
    const Vec2 e = params.direction.normalized();
    const auto g = recovered_gradient(u);
    std::vector<double> G(g.size());
    for (std::size_t i = 0; i < g.size(); ++i) G[i] = cutoff(g[i].dot(e), params.c0, params.c1);
    double sum = 0.0;
    for (std::size_t t = 0; t < mesh.triangle_count(); ++t) {
        const int ti = static_cast<int>(t);
        if (in_window(mesh, ti, params.window)) sum += mesh.area(ti) * p1_gradient(mesh, ti, G).squaredNorm();
    }
    return sum;
}

double directional_dirichlet(const ScalarField& u, const Vec2& direction, const Disk& window) {
    const TriMesh& mesh = u.mesh();
    require_window(mesh, window);
    const Vec2 e = direction.normalized();
    const auto g = recovered_gradient(u);
    std::vector<double> ue(g.size());
    for (std::size_t i = 0; i < g.size(); ++i) ue[i] = g[i].dot(e);
    double sum = 0.0;
    for (std::size_t t = 0; t < mesh.triangle_count(); ++t) {
        const int ti = static_cast<int>(t);
        if (in_window(mesh, ti, window)) sum += mesh.area(ti) * p1_gradient(mesh, ti, ue).squaredNorm();
    }
    return sum;
}

double hessian_energy(const ScalarField& u, const std::function<bool(const Vec2&)>& gradient_region,
                      const Disk& window) {
    const TriMesh& mesh = u.mesh();
    require_window(mesh, window);
    const auto g = recovered_gradient(u);
    std::vector<double> gx(g.size()), gy(g.size());
    for (std::size_t i = 0; i < g.size(); ++i) {
        gx[i] = g[i].x();
        gy[i] = g[i].y();
    }
    double sum = 0.0;
    for (std::size_t t = 0; t < mesh.triangle_count(); ++t) {
        const int ti = static_cast<int>(t);
        if (!in_window(mesh, ti, window) || !gradient_region(u.gradient(ti))) continue;
        sum += mesh.area(ti) * (p1_gradient(mesh, ti, gx).squaredNorm() + p1_gradient(mesh, ti, gy).squaredNorm());
    }
    return sum;
}

// ---------------------------------------------------------------------------
// Moduli
// ---------------------------------------------------------------------------

Curve gradient_modulus(const ScalarField& u, const std::vector<double>& radii, std::size_t max_centres) {
    std::vector<Vec2> v(u.mesh().triangle_count());
    for (std::size_t t = 0; t < v.size(); ++t) v[t] = u.gradient(static_cast<int>(t));
    return modulus_curve(u.mesh(), v, radii, max_centres);
}

Curve h_continuity(const ScalarField& u, const GradientPolygon& N, const std::vector<double>& radii,
                   std::size_t max_centres) {
    std::vector<Vec3> v(u.mesh().triangle_count());
    for (std::size_t t = 0; t < v.size(); ++t) v[t] = N.h_map(u.gradient(static_cast<int>(t)));
    return modulus_curve(u.mesh(), v, radii, max_centres);
}

// ---------------------------------------------------------------------------
// Facets
// ---------------------------------------------------------------------------

std::vector<FacetReport> detect_facets(const ScalarField& u, const GradientPolygon& N, double facet_tol,
                                       double geometric_tol, std::size_t min_triangles) {
    const TriMesh& mesh = u.mesh();
    const double tol = geometric_tol > 0 ? geometric_tol : 2.0 * mesh.mesh_size();
    const auto edges = mesh_edges(mesh);
    const std::size_t nt = mesh.triangle_count();
    std::vector<Vec2> grad(nt);
    for (std::size_t t = 0; t < nt; ++t) grad[t] = u.gradient(static_cast<int>(t));

    std::vector<FacetReport> out;
    for (std::size_t i = 0; i < N.size(); ++i) {
        const Vec2& p = N.vertex(i);
        const Vec2 omega = N.vertex_cone_direction(i);
        const Vec2 perp(-omega.y(), omega.x());
        std::vector<char> in(nt, 0);
        for (std::size_t t = 0; t < nt; ++t) in[t] = (grad[t] - p).norm() <= facet_tol;
        UnionFind uf(nt);
        for (const auto& e : edges)
            if (e.t2 >= 0 && in[e.t1] && in[e.t2]) uf.unite(e.t1, e.t2);
        std::map<int, std::vector<int>> comps;
        for (std::size_t t = 0; t < nt; ++t)
            if (in[t]) comps[uf.find(static_cast<int>(t))].push_back(static_cast<int>(t));
        for (auto& [root, tris] : comps) {
            if (tris.size() < min_triangles) continue;
            FacetReport r;
            r.vertex = static_cast<int>(i);
            r.slope = p;
            r.omega = omega;
            r.triangles = tris;
            // Boundary edges inside Ω with length-weighted outward normals.
            std::vector<std::pair<Vec2, Vec2>> bnd;  // midpoint, normal
            std::map<int, Vec2> chain;
            for (const auto& e : edges) {
                if (e.t2 < 0) continue;  // on ∂Ω
                const bool a = in[e.t1] && uf.find(e.t1) == root, b = in[e.t2] && uf.find(e.t2) == root;
                if (a == b) continue;
                const int inside = a ? e.t1 : e.t2;
                const Vec2 A = mesh.nodes[e.a], B = mesh.nodes[e.b];
                Vec2 n(-(B - A).y(), (B - A).x());
                if (n.dot(0.5 * (A + B) - mesh.centroid(inside)) < 0) n = -n;
                bnd.emplace_back(0.5 * (A + B), n);
                for (int k : {e.a, e.b}) chain[k] = mesh.nodes[k];
            }
            // Staircase boundaries alternate edge normals; classify nodes by
            // the normal averaged over edges within 3h.
            const double reach = 3.0 * mesh.mesh_size();
            std::map<int, Vec2> upper, lower;
            for (const auto& [k, x] : chain) {
                Vec2 n = Vec2::Zero();
                for (const auto& [m, ne] : bnd)
                    if ((m - x).norm() <= reach) n += ne;
                auto& side = n.dot(omega) >= 0 ? upper : lower;
                side[k] = Vec2(x.dot(perp), x.dot(omega));
            }
            for (const auto& [k, q] : upper) r.upper_chain.push_back(q);
            for (const auto& [k, q] : lower) r.lower_chain.push_back(q);
            auto by_s = [](const Vec2& a, const Vec2& b) { return a.x() < b.x() || (a.x() == b.x() && a.y() < b.y()); };
            std::sort(r.upper_chain.begin(), r.upper_chain.end(), by_s);
            std::sort(r.lower_chain.begin(), r.lower_chain.end(), by_s);
            r.upper_violation = convex_violation(r.upper_chain);
            std::vector<Vec2> flipped;
            for (const auto& q : r.lower_chain) flipped.emplace_back(q.x(), -q.y());
            r.lower_violation = convex_violation(flipped);
            r.upper_convex = r.upper_violation <= tol;
            r.lower_concave = r.lower_violation <= tol;
            out.push_back(std::move(r));
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Jump segments
// ---------------------------------------------------------------------------

JumpReport detect_jump_segments(const ScalarField& u, const GradientPolygon& N, double jump_tol,
                                double angle_tolerance, double cluster_angle) {
    const TriMesh& mesh = u.mesh();
    const double h = mesh.mesh_size();
    JumpReport report;
    report.angle_tolerance = angle_tolerance;
    report.residual_tolerance = 4.0 * h * u.lipschitz();

    std::vector<Vec2> jumps;
    for (const auto& e : mesh_edges(mesh)) {
        if (e.t2 < 0) continue;
        const Vec2 J = u.gradient(e.t1) - u.gradient(e.t2);
        if (J.norm() > jump_tol) {
            report.jump_edges.emplace_back(e.a, e.b);
            jumps.push_back(J.normalized());
        }
    }
    const std::size_t ne = report.jump_edges.size();
    UnionFind uf(ne);
    std::map<int, std::vector<int>> at_node;
    for (std::size_t k = 0; k < ne; ++k) {
        at_node[report.jump_edges[k].first].push_back(static_cast<int>(k));
        at_node[report.jump_edges[k].second].push_back(static_cast<int>(k));
    }
    const double cos_tol = std::cos(cluster_angle * std::numbers::pi / 180.0);
    for (const auto& [node, list] : at_node)
        for (std::size_t a = 0; a < list.size(); ++a)
            for (std::size_t b = a + 1; b < list.size(); ++b)
                if (std::abs(jumps[list[a]].dot(jumps[list[b]])) >= cos_tol) uf.unite(list[a], list[b]);
    std::map<int, std::vector<int>> clusters;
    for (std::size_t k = 0; k < ne; ++k) clusters[uf.find(static_cast<int>(k))].push_back(static_cast<int>(k));

    for (const auto& [root, list] : clusters) {
        JumpSegment s;
        s.edges = list.size();
        double mass = 0.0;
        Vec2 m = Vec2::Zero();
        for (int k : list) {
            const Vec2 A = mesh.nodes[report.jump_edges[k].first], B = mesh.nodes[report.jump_edges[k].second];
            const double L = (B - A).norm();
            mass += L;
            m += L * 0.5 * (A + B);
        }
        m /= mass;
        // Second moment of the union of edge segments about m.
        Mat2 C = Mat2::Zero();
        for (int k : list) {
            const Vec2 A = mesh.nodes[report.jump_edges[k].first], B = mesh.nodes[report.jump_edges[k].second];
            const double L = (B - A).norm();
            const Vec2 c = 0.5 * (A + B) - m;
            C += L * (c * c.transpose() + (B - A) * (B - A).transpose() / 12.0);
        }
        Eigen::SelfAdjointEigenSolver<Mat2> eig(C);
        s.point = m;
        s.direction = eig.eigenvectors().col(1);
        std::vector<int> nodes;
        for (int k : list) {
            nodes.push_back(report.jump_edges[k].first);
            nodes.push_back(report.jump_edges[k].second);
        }
        std::sort(nodes.begin(), nodes.end());
        nodes.erase(std::unique(nodes.begin(), nodes.end()), nodes.end());
        s.s_min = 1e300;
        s.s_max = -1e300;
        int first = nodes[0];
        for (int k : nodes) {
            const double t = (mesh.nodes[k] - m).dot(s.direction);
            if (t < s.s_min) {
                s.s_min = t;
                first = k;
            }
            s.s_max = std::max(s.s_max, t);
        }
        s.reach_start = mesh.boundary_distance(m + s.s_min * s.direction) <= 2.0 * h;
        s.reach_end = mesh.boundary_distance(m + s.s_max * s.direction) <= 2.0 * h;
        double best = 1e300;
        for (std::size_t i = 0; i < N.size(); ++i) {
            const double c = std::min(1.0, std::abs(s.direction.dot(N.inward_normal(i))));
            const double dev = std::acos(c) * 180.0 / std::numbers::pi;
            if (dev < best) {
                best = dev;
                s.side = static_cast<int>(i);
            }
        }
        s.angle_deviation = best;
        const Vec2& p = N.vertex(static_cast<std::size_t>(s.side));
        const Vec2 x0 = mesh.nodes[first];
        const double u0 = u.values()[first];
        for (int k : nodes)
            s.affine_residual = std::max(s.affine_residual, std::abs(u.values()[k] - u0 - p.dot(mesh.nodes[k] - x0)));
        s.compliant = s.angle_deviation <= angle_tolerance && (s.reach_start || s.reach_end) &&
                      s.affine_residual <= report.residual_tolerance;
        report.segments.push_back(s);
    }
    return report;
}

}  // namespace limitshape
