#include "limitshape/mesh.hpp"

#include "limitshape/polygon.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <set>
#include <utility>

namespace limitshape {

// ---------------------------------------------------------------------------
// TriMesh
// ---------------------------------------------------------------------------

void TriMesh::finalize() {
    const std::size_t nt = triangles.size();
    if (nt == 0) throw MeshDegenerateError("mesh has no triangles");
    area_.assign(nt, 0.0);
    hat_.assign(3 * nt, Vec2::Zero());
    total_area_ = 0.0;
    h_ = 0.0;
    std::map<std::pair<int, int>, int> edge_count;
    for (std::size_t t = 0; t < nt; ++t) {
        auto& tri = triangles[t];
        for (int k : tri)
            if (k < 0 || static_cast<std::size_t>(k) >= nodes.size())
                throw MeshDegenerateError("triangle references a missing node");
        double a2 = cross(nodes[tri[1]] - nodes[tri[0]], nodes[tri[2]] - nodes[tri[0]]);
        if (a2 < 0) {
            std::swap(tri[1], tri[2]);
            a2 = -a2;
        }
        double longest = 0.0;
        for (int k = 0; k < 3; ++k) longest = std::max(longest, (nodes[tri[(k + 1) % 3]] - nodes[tri[k]]).norm());
        if (!(a2 > 1e-14 * longest * longest)) throw MeshDegenerateError("mesh contains a degenerate triangle");
        h_ = std::max(h_, longest);
        area_[t] = 0.5 * a2;
        total_area_ += area_[t];
        for (int k = 0; k < 3; ++k) {
            // ∇λ_k is the inward edge normal of the opposite edge over twice the area.
            const Vec2 e = nodes[tri[(k + 2) % 3]] - nodes[tri[(k + 1) % 3]];
            hat_[3 * t + k] = Vec2(-e.y(), e.x()) / a2;
            const int a = tri[k], b = tri[(k + 1) % 3];
            ++edge_count[{std::min(a, b), std::max(a, b)}];
        }
    }
    boundary_.assign(nodes.size(), 0);
    for (const auto& [e, count] : edge_count) {
        if (count > 2) throw MeshDegenerateError("mesh edge shared by more than two triangles");
        if (count == 1) boundary_[e.first] = boundary_[e.second] = 1;
    }
    boundary_list_.clear();
    for (std::size_t i = 0; i < nodes.size(); ++i)
        if (boundary_[i]) boundary_list_.push_back(static_cast<int>(i));
    star_.assign(nodes.size(), {});
    for (std::size_t t = 0; t < nt; ++t)
        for (int k : triangles[t]) star_[k].push_back(static_cast<int>(t));

    Vec2 lo = nodes[0], hi = nodes[0];
    for (const auto& p : nodes) {
        lo = lo.cwiseMin(p);
        hi = hi.cwiseMax(p);
    }
    lo_ = lo;
    const double span = std::max((hi - lo).maxCoeff(), 1e-12);
    const double target = std::sqrt(static_cast<double>(nt));
    cell_ = std::max(span / std::max(target, 1.0), 1e-12);
    gx_ = static_cast<int>((hi.x() - lo.x()) / cell_) + 1;
    gy_ = static_cast<int>((hi.y() - lo.y()) / cell_) + 1;
    buckets_.assign(static_cast<std::size_t>(gx_) * gy_, {});
    for (std::size_t t = 0; t < nt; ++t) {
        Vec2 a = nodes[triangles[t][0]], b = a;
        for (int k : triangles[t]) {
            a = a.cwiseMin(nodes[k]);
            b = b.cwiseMax(nodes[k]);
        }
        const int i0 = std::clamp(static_cast<int>((a.x() - lo_.x()) / cell_), 0, gx_ - 1);
        const int i1 = std::clamp(static_cast<int>((b.x() - lo_.x()) / cell_), 0, gx_ - 1);
        const int j0 = std::clamp(static_cast<int>((a.y() - lo_.y()) / cell_), 0, gy_ - 1);
        const int j1 = std::clamp(static_cast<int>((b.y() - lo_.y()) / cell_), 0, gy_ - 1);
        for (int i = i0; i <= i1; ++i)
            for (int j = j0; j <= j1; ++j) buckets_[static_cast<std::size_t>(j) * gx_ + i].push_back(static_cast<int>(t));
    }
    if (outline.empty()) throw MeshDegenerateError("mesh has no outline");
    if (signed_area(outline) < 0) std::reverse(outline.begin(), outline.end());
}

Vec2 TriMesh::centroid(int t) const {
    const auto& tri = triangles[t];
    return (nodes[tri[0]] + nodes[tri[1]] + nodes[tri[2]]) / 3.0;
}

std::optional<Location> TriMesh::locate(const Vec2& x, double tol) const {
    const int i = static_cast<int>(std::floor((x.x() - lo_.x()) / cell_));
    const int j = static_cast<int>(std::floor((x.y() - lo_.y()) / cell_));
    std::optional<Location> best;
    double best_margin = -std::numeric_limits<double>::infinity();
    for (int di = -1; di <= 1; ++di)
        for (int dj = -1; dj <= 1; ++dj) {
            const int a = i + di, b = j + dj;
            if (a < 0 || b < 0 || a >= gx_ || b >= gy_) continue;
            for (int t : buckets_[static_cast<std::size_t>(b) * gx_ + a]) {
                const auto& tri = triangles[t];
                Location loc{t, {}};
                double margin = std::numeric_limits<double>::infinity();
                for (int k = 0; k < 3; ++k) {
                    loc.bary[k] = 1.0 / 3.0 + hat_[3 * t + k].dot(x - centroid(t));
                    margin = std::min(margin, loc.bary[k]);
                }
                (void)tri;
                if (margin > best_margin) {
                    best_margin = margin;
                    best = loc;
                }
            }
        }
    if (!best || best_margin < -tol) return std::nullopt;
    return best;
}

double TriMesh::boundary_distance(const Vec2& x) const { return distance_to_loop(outline, x); }

// ---------------------------------------------------------------------------
// Generators
// ---------------------------------------------------------------------------

TriMesh rectangle_mesh(const Vec2& lo, const Vec2& hi, int nx, int ny) {
    if (nx < 1 || ny < 1 || !(hi.x() > lo.x()) || !(hi.y() > lo.y()))
        throw MeshDegenerateError("rectangle mesh needs positive extent and cell counts");
    TriMesh m;
    for (int j = 0; j <= ny; ++j)
        for (int i = 0; i <= nx; ++i)
            m.nodes.emplace_back(lo.x() + (hi.x() - lo.x()) * i / nx, lo.y() + (hi.y() - lo.y()) * j / ny);
    auto id = [nx](int i, int j) { return j * (nx + 1) + i; };
    for (int j = 0; j < ny; ++j)
        for (int i = 0; i < nx; ++i) {
            m.triangles.push_back({id(i, j), id(i + 1, j), id(i + 1, j + 1)});
            m.triangles.push_back({id(i, j), id(i + 1, j + 1), id(i, j + 1)});
        }
    m.outline = {lo, {hi.x(), lo.y()}, hi, {lo.x(), hi.y()}};
    m.finalize();
    return m;
}

std::array<std::array<int, 2>, 6> hexagon_corners(int a, int b, int c) {
    return {{{a, 0}, {a - b, b}, {-b, b}, {-b, b - c}, {0, -c}, {a, -c}}};
}

TriMesh hexagon_mesh(int a, int b, int c, double scale, int refine) {
    if (a < 1 || b < 1 || c < 1 || refine < 1 || !(scale > 0))
        throw MeshDegenerateError("hexagon mesh needs positive sides, scale and refinement");
    const int A = a * refine, B = b * refine, C = c * refine;
    auto inside = [&](int i, int j) { return -B <= i && i <= A && -C <= j && j <= B && -C <= i + j && i + j <= A; };
    TriMesh m;
    std::map<std::pair<int, int>, int> id;
    const double s = 1.0 / (refine * scale);
    for (int j = -C; j <= B; ++j)
        for (int i = -B; i <= A; ++i)
            if (inside(i, j)) {
                id[{i, j}] = static_cast<int>(m.nodes.size());
                m.nodes.push_back(s * lattice_point(i, j));
            }
    for (int j = -C; j <= B; ++j)
        for (int i = -B; i <= A; ++i) {
            if (inside(i, j) && inside(i + 1, j) && inside(i, j + 1))
                m.triangles.push_back({id[{i, j}], id[{i + 1, j}], id[{i, j + 1}]});
            if (inside(i + 1, j) && inside(i + 1, j + 1) && inside(i, j + 1))
                m.triangles.push_back({id[{i + 1, j}], id[{i + 1, j + 1}], id[{i, j + 1}]});
        }
    for (const auto& [i, j] : hexagon_corners(a, b, c)) m.outline.push_back(lattice_point(i, j) / scale);
    m.finalize();
    return m;
}

namespace {

struct DelaunayTri {
    std::array<int, 3> v;
    Vec2 centre;
    double r2;
};

DelaunayTri make_tri(const std::vector<Vec2>& p, int a, int b, int c) {
    if (cross(p[b] - p[a], p[c] - p[a]) < 0) std::swap(b, c);
    const Vec2 B = p[b] - p[a], C = p[c] - p[a];
    const double d = 2.0 * cross(B, C);
    const Vec2 u((C.y() * B.squaredNorm() - B.y() * C.squaredNorm()) / d,
                 (B.x() * C.squaredNorm() - C.x() * B.squaredNorm()) / d);
    return {{a, b, c}, p[a] + u, u.squaredNorm()};
}

// Bowyer-Watson on all points; the three trailing points form the super triangle.
std::vector<DelaunayTri> bowyer_watson(std::vector<Vec2>& p) {
    Vec2 lo = p[0], hi = p[0];
    for (const auto& q : p) {
        lo = lo.cwiseMin(q);
        hi = hi.cwiseMax(q);
    }
    const Vec2 mid = 0.5 * (lo + hi);
    const double R = 20.0 * std::max((hi - lo).maxCoeff(), 1e-9);
    const int n = static_cast<int>(p.size());
    p.push_back(mid + Vec2(-R, -R));
    p.push_back(mid + Vec2(R, -R));
    p.push_back(mid + Vec2(0, R));
    std::vector<DelaunayTri> tris{make_tri(p, n, n + 1, n + 2)};
    for (int k = 0; k < n; ++k) {
        std::vector<std::pair<int, int>> edges;
        std::vector<DelaunayTri> keep;
        keep.reserve(tris.size() + 2);
        for (const auto& t : tris) {
            if ((p[k] - t.centre).squaredNorm() < t.r2 * (1.0 - 1e-12)) {
                for (int e = 0; e < 3; ++e) edges.emplace_back(t.v[e], t.v[(e + 1) % 3]);
            } else {
                keep.push_back(t);
            }
        }
        // Cavity boundary: edges seen once.
        for (std::size_t e = 0; e < edges.size(); ++e) {
            bool shared = false;
            for (std::size_t f = 0; f < edges.size(); ++f)
                if (e != f && edges[e].first == edges[f].second && edges[e].second == edges[f].first) {
                    shared = true;
                    break;
                }
            if (!shared) keep.push_back(make_tri(p, edges[e].first, edges[e].second, k));
        }
        tris = std::move(keep);
    }
    p.resize(n);
    std::erase_if(tris, [n](const DelaunayTri& t) { return t.v[0] >= n || t.v[1] >= n || t.v[2] >= n; });
    return tris;
}

}  // namespace

TriMesh polygon_mesh(std::span<const Vec2> outline_in, double h) {
    std::vector<Vec2> outline(outline_in.begin(), outline_in.end());
    if (!is_simple_loop(outline)) throw MeshDegenerateError("domain outline is not a simple polygon");
    if (!(h > 0)) throw MeshDegenerateError("mesh size must be positive");
    if (signed_area(outline) < 0) std::reverse(outline.begin(), outline.end());

    // Boundary chain, each polygon side split into pieces of length <= h.
    std::vector<Vec2> chain;
    for (std::size_t i = 0; i < outline.size(); ++i) {
        const Vec2& a = outline[i];
        const Vec2& b = outline[(i + 1) % outline.size()];
        const int pieces = std::max(1, static_cast<int>(std::ceil((b - a).norm() / h)));
        for (int k = 0; k < pieces; ++k) chain.push_back(a + (b - a) * (static_cast<double>(k) / pieces));
    }
    Vec2 lo = outline[0], hi = outline[0];
    for (const auto& q : outline) {
        lo = lo.cwiseMin(q);
        hi = hi.cwiseMax(q);
    }
    std::vector<Vec2> interior;
    const double dy = h * std::sqrt(3.0) / 2.0;
    int row = 0;
    for (double y = lo.y() + 0.5 * dy; y < hi.y(); y += dy, ++row)
        for (double x = lo.x() + (row % 2 ? 0.5 * h : 0.0); x < hi.x(); x += h) {
            const Vec2 q(x, y);
            if (point_in_polygon(outline, q, 0.0) && distance_to_loop(outline, q) > 0.45 * h) interior.push_back(q);
        }

    for (int round = 0; round < 40; ++round) {
        std::vector<Vec2> pts = chain;
        pts.insert(pts.end(), interior.begin(), interior.end());
        const auto tris = bowyer_watson(pts);
        std::map<std::pair<int, int>, int> edges;
        for (const auto& t : tris)
            for (int e = 0; e < 3; ++e) {
                const int a = t.v[e], b = t.v[(e + 1) % 3];
                edges[{std::min(a, b), std::max(a, b)}] = 1;
            }
        // Split any boundary segment missing from the triangulation.
        std::vector<Vec2> next;
        bool missing = false;
        const int nc = static_cast<int>(chain.size());
        for (int i = 0; i < nc; ++i) {
            next.push_back(chain[i]);
            const int j = (i + 1) % nc;
            if (!edges.count({std::min(i, j), std::max(i, j)})) {
                missing = true;
                next.push_back(0.5 * (chain[i] + chain[j]));
            }
        }
        if (missing) {
            chain = std::move(next);
            // Interior points too close to the refined boundary would keep encroaching.
            std::erase_if(interior, [&](const Vec2& q) {
                for (std::size_t k = 0; k < chain.size(); ++k) {
                    const Vec2& a = chain[k];
                    const Vec2& b = chain[(k + 1) % chain.size()];
                    if ((q - 0.5 * (a + b)).norm() <= 0.5 * (b - a).norm() + 1e-12) return true;
                }
                return false;
            });
            continue;
        }
        TriMesh m;
        m.nodes = pts;
        for (const auto& t : tris) {
            const Vec2 c = (pts[t.v[0]] + pts[t.v[1]] + pts[t.v[2]]) / 3.0;
            if (point_in_polygon(outline, c, 0.0)) m.triangles.push_back(t.v);
        }
        m.outline = outline;
        m.finalize();
        return m;
    }
    throw MeshDegenerateError("conforming Delaunay refinement did not terminate");
}

TriMesh mesh_from_triangles(std::vector<Vec2> nodes, std::vector<std::array<int, 3>> triangles) {
    TriMesh m;
    m.nodes = std::move(nodes);
    m.triangles = std::move(triangles);
    std::set<std::pair<int, int>> directed;
    for (auto& t : m.triangles) {
        for (int k : t)
            if (k < 0 || static_cast<std::size_t>(k) >= m.nodes.size())
                throw MeshDegenerateError("triangle refers to a missing node");
        if (cross(m.nodes[t[1]] - m.nodes[t[0]], m.nodes[t[2]] - m.nodes[t[0]]) < 0) std::swap(t[1], t[2]);
        for (int k = 0; k < 3; ++k) directed.insert({t[k], t[(k + 1) % 3]});
    }
    std::map<int, int> next;
    for (const auto& [a, b] : directed)
        if (!directed.count({b, a})) {
            if (next.count(a)) throw MeshDegenerateError("mesh boundary touches itself");
            next[a] = b;
        }
    if (next.empty()) throw MeshDegenerateError("mesh has no boundary");
    const int start = next.begin()->first;
    int v = start;
    do {
        m.outline.push_back(m.nodes[v]);
        v = next.at(v);
    } while (v != start && m.outline.size() <= next.size());
    if (m.outline.size() != next.size()) throw MeshDegenerateError("mesh boundary is not a single loop");
    m.finalize();
    return m;
}

TriMesh refine(const TriMesh& mesh) {
    TriMesh m;
    m.nodes = mesh.nodes;
    m.outline = mesh.outline;
    std::map<std::pair<int, int>, int> mid;
    auto midpoint = [&](int a, int b) {
        const auto key = std::make_pair(std::min(a, b), std::max(a, b));
        auto it = mid.find(key);
        if (it != mid.end()) return it->second;
        const int id = static_cast<int>(m.nodes.size());
        m.nodes.push_back(0.5 * (mesh.nodes[a] + mesh.nodes[b]));
        mid[key] = id;
        return id;
    };
    for (const auto& t : mesh.triangles) {
        const int ab = midpoint(t[0], t[1]), bc = midpoint(t[1], t[2]), ca = midpoint(t[2], t[0]);
        m.triangles.push_back({t[0], ab, ca});
        m.triangles.push_back({ab, t[1], bc});
        m.triangles.push_back({ca, bc, t[2]});
        m.triangles.push_back({ab, bc, ca});
    }
    m.finalize();
    return m;
}

// ---------------------------------------------------------------------------
// ScalarField
// ---------------------------------------------------------------------------

ScalarField::ScalarField(std::shared_ptr<const TriMesh> mesh, Eigen::VectorXd values)
    : mesh_(std::move(mesh)), values_(std::move(values)) {
    if (static_cast<std::size_t>(values_.size()) != mesh_->node_count())
        throw MeshMismatchError("field size does not match the mesh node count");
}

ScalarField ScalarField::interpolate(std::shared_ptr<const TriMesh> mesh,
                                     const std::function<double(const Vec2&)>& f) {
    Eigen::VectorXd v(mesh->node_count());
    for (std::size_t i = 0; i < mesh->node_count(); ++i) v[i] = f(mesh->nodes[i]);
    return ScalarField(std::move(mesh), std::move(v));
}

Vec2 ScalarField::gradient(int t) const {
    const auto& tri = mesh_->triangles[t];
    Vec2 g = Vec2::Zero();
    for (int k = 0; k < 3; ++k) g += values_[tri[k]] * mesh_->hat_gradient(t, k);
    return g;
}

double ScalarField::lipschitz() const {
    double M = 0.0;
    for (std::size_t t = 0; t < mesh_->triangle_count(); ++t) M = std::max(M, gradient(static_cast<int>(t)).norm());
    return M;
}

double ScalarField::value_at(const Vec2& x) const {
    const auto loc = mesh_->locate(x);
    if (!loc) throw OutsideDomainError("point outside the mesh");
    const auto& tri = mesh_->triangles[loc->triangle];
    double v = 0.0;
    for (int k = 0; k < 3; ++k) v += loc->bary[k] * values_[tri[k]];
    return v;
}

}  // namespace limitshape
