#include "limitshape/sampler.hpp"

#include <algorithm>
#include <climits>
#include <cmath>
#include <functional>
#include <queue>
#include <set>
#include <sstream>

namespace limitshape {

namespace {

int mod3(int v) { return ((v % 3) + 3) % 3; }

// Step cost bound h(w) - h(v) <= cost along v -> w.
int step_cost(int dir) { return dir < 3 ? 1 : 2; }

int reverse_dir(int dir) { return dir < 3 ? dir + 3 : dir - 3; }

// Multi-source shortest paths; `reverse` follows edges backwards.
std::vector<long> dijkstra(const std::vector<int>& nbr, std::size_t n, const std::vector<std::pair<int, long>>& sources,
                           bool reverse) {
    std::vector<long> dist(n, LONG_MAX);
    using Item = std::pair<long, int>;
    std::priority_queue<Item, std::vector<Item>, std::greater<>> q;
    for (const auto& [s, d] : sources)
        if (d < dist[s]) {
            dist[s] = d;
            q.emplace(d, s);
        }
    while (!q.empty()) {
        const auto [d, v] = q.top();
        q.pop();
        if (d != dist[v]) continue;
        for (int dir = 0; dir < 6; ++dir) {
            const int w = nbr[6 * v + dir];
            if (w < 0) continue;
            // Forward: v -> w costs step_cost(dir). Reverse: w -> v along the opposite direction.
            const long c = reverse ? step_cost(reverse_dir(dir)) : step_cost(dir);
            if (d + c < dist[w]) {
                dist[w] = d + c;
                q.emplace(dist[w], w);
            }
        }
    }
    return dist;
}

}  // namespace

std::string lozenge_convention() {
    return "site (i,j) at i(1,0)+j(1/2,sqrt3/2); h = x+y+z with steps {+1,-2} along (1,0),(-1,1),(0,-1); "
           "x = eps*position, u = eps*h/3; N = triangle (-2/3,0),(1/3,-1/sqrt3),(1/3,1/sqrt3)";
}

// ---------------------------------------------------------------------------
// LatticeRegion
// ---------------------------------------------------------------------------

LatticeRegion::LatticeRegion(std::vector<std::array<int, 2>> sites, const std::map<std::array<int, 2>, int>& fixed,
                             double spacing)
    : sites_(std::move(sites)), spacing_(spacing) {
    if (sites_.empty()) throw InadmissibleBoundaryError("lattice region has no sites");
    if (!(spacing_ > 0)) throw ConfigError("lattice spacing must be positive");
    std::sort(sites_.begin(), sites_.end(), [](const auto& a, const auto& b) {
        return a[1] < b[1] || (a[1] == b[1] && a[0] < b[0]);
    });
    if (std::adjacent_find(sites_.begin(), sites_.end()) != sites_.end())
        throw InadmissibleBoundaryError("lattice region lists a site twice");
    int i1 = sites_[0][0], j1 = sites_[0][1];
    i0_ = i1;
    j0_ = j1;
    for (const auto& s : sites_) {
        i0_ = std::min(i0_, s[0]);
        j0_ = std::min(j0_, s[1]);
        i1 = std::max(i1, s[0]);
        j1 = std::max(j1, s[1]);
    }
    width_ = i1 - i0_ + 1;
    height_ = j1 - j0_ + 1;
    lookup_.assign(static_cast<std::size_t>(width_) * height_, -1);
    for (std::size_t k = 0; k < sites_.size(); ++k)
        lookup_[static_cast<std::size_t>(sites_[k][1] - j0_) * width_ + (sites_[k][0] - i0_)] = static_cast<int>(k);

    const std::size_t n = sites_.size();
    nbr_.assign(6 * n, -1);
    std::size_t edges = 0, triangles = 0;
    for (std::size_t k = 0; k < n; ++k) {
        const auto [i, j] = sites_[k];
        for (int d = 0; d < 3; ++d) {
            nbr_[6 * k + d] = index(i + kLatticeSteps[d][0], j + kLatticeSteps[d][1]);
            nbr_[6 * k + d + 3] = index(i - kLatticeSteps[d][0], j - kLatticeSteps[d][1]);
            if (nbr_[6 * k + d] >= 0) ++edges;
        }
        if (index(i + 1, j) >= 0 && index(i, j + 1) >= 0) ++triangles;
        if (index(i, j + 1) >= 0 && index(i - 1, j + 1) >= 0) ++triangles;
    }
    // Connected and Euler characteristic one.
    std::vector<char> seen(n, 0);
    std::vector<int> stack{0};
    seen[0] = 1;
    std::size_t reached = 1;
    while (!stack.empty()) {
        const int v = stack.back();
        stack.pop_back();
        for (int d = 0; d < 6; ++d) {
            const int w = nbr_[6 * v + d];
            if (w >= 0 && !seen[w]) {
                seen[w] = 1;
                ++reached;
                stack.push_back(w);
            }
        }
    }
    if (reached != n) throw InadmissibleBoundaryError("lattice region is not connected");
    if (static_cast<long>(n) - static_cast<long>(edges) + static_cast<long>(triangles) != 1)
        throw InadmissibleBoundaryError("lattice region is not simply connected");

    fixed_.assign(n, 0);
    fixed_height_.assign(n, 0);
    for (const auto& [s, h] : fixed) {
        const int k = index(s[0], s[1]);
        if (k < 0) throw InadmissibleBoundaryError("fixed height at a site outside the region");
        if (mod3(h) != mod3(s[0] - s[1])) {
            std::ostringstream msg;
            msg << "height " << h << " at (" << s[0] << ", " << s[1] << ") has the wrong residue mod 3";
            throw InadmissibleBoundaryError(msg.str());
        }
        fixed_[k] = 1;
        fixed_height_[k] = h;
    }
    std::vector<std::pair<int, long>> up_src, low_src;
    for (std::size_t k = 0; k < n; ++k) {
        const bool complete = std::all_of(nbr_.begin() + 6 * k, nbr_.begin() + 6 * k + 6, [](int w) { return w >= 0; });
        if (!complete && !fixed_[k]) {
            std::ostringstream msg;
            msg << "site (" << sites_[k][0] << ", " << sites_[k][1] << ") is on the region boundary but has no fixed height";
            throw InadmissibleBoundaryError(msg.str());
        }
        if (fixed_[k]) {
            up_src.emplace_back(static_cast<int>(k), fixed_height_[k]);
            low_src.emplace_back(static_cast<int>(k), -fixed_height_[k]);
        } else {
            interior_.push_back(static_cast<int>(k));
        }
    }
    if (up_src.empty()) throw InadmissibleBoundaryError("lattice region has no fixed heights");
    // max(v) = min_b h(b) + D(b -> v);  min(v) = max_b h(b) - D(v -> b).
    const auto up = dijkstra(nbr_, n, up_src, false);
    const auto low = dijkstra(nbr_, n, low_src, true);
    max_.resize(n);
    min_.resize(n);
    for (std::size_t k = 0; k < n; ++k) {
        max_[k] = static_cast<int>(up[k]);
        min_[k] = static_cast<int>(-low[k]);
        if (fixed_[k] && (max_[k] != fixed_height_[k] || min_[k] != fixed_height_[k])) {
            std::ostringstream msg;
            msg << "fixed heights do not extend to a tiling: site (" << sites_[k][0] << ", " << sites_[k][1]
                << ") has height " << fixed_height_[k] << " but the extensions allow [" << min_[k] << ", " << max_[k]
                << "]";
            throw InadmissibleBoundaryError(msg.str());
        }
    }
    side_ = std::max(1, static_cast<int>(std::lround(std::sqrt(static_cast<double>(n) / 3.0))));
}

LatticeRegion LatticeRegion::hexagon(int a, int b, int c, double scale) {
    if (a < 0 || b < 0 || c < 0) throw ConfigError("hexagon sides must be nonnegative");
    std::vector<std::array<int, 2>> sites;
    std::map<std::array<int, 2>, int> fixed;
    auto inside = [&](int i, int j) { return -b <= i && i <= a && -c <= j && j <= b && -c <= i + j && i + j <= a; };
    for (int j = -c; j <= b; ++j)
        for (int i = -b; i <= a; ++i) {
            if (!inside(i, j)) continue;
            sites.push_back({i, j});
            bool boundary = false;
            for (const auto& d : kLatticeSteps)
                boundary = boundary || !inside(i + d[0], j + d[1]) || !inside(i - d[0], j - d[1]);
            // Empty box: the visible point of the line (i+y, y, y-j) has y = max(-i, 0, j).
            if (boundary) fixed[{i, j}] = 3 * std::max({-i, 0, j}) + i - j;
        }
    LatticeRegion r(std::move(sites), fixed, 1.0 / scale);
    r.side_ = std::max({a, b, c, 1});
    return r;
}

int LatticeRegion::index(int i, int j) const {
    const int x = i - i0_, y = j - j0_;
    if (x < 0 || y < 0 || x >= width_ || y >= height_) return -1;
    return lookup_[static_cast<std::size_t>(y) * width_ + x];
}

Vec2 LatticeRegion::position(std::size_t k) const { return spacing_ * lattice_point(sites_[k][0], sites_[k][1]); }

std::shared_ptr<const TriMesh> LatticeRegion::mesh() const {
    std::vector<Vec2> nodes;
    for (std::size_t k = 0; k < sites_.size(); ++k) nodes.push_back(position(k));
    std::vector<std::array<int, 3>> triangles;
    for (std::size_t k = 0; k < sites_.size(); ++k) {
        const auto [i, j] = sites_[k];
        const int r = index(i + 1, j), t = index(i, j + 1), lt = index(i - 1, j + 1);
        if (r >= 0 && t >= 0) triangles.push_back({static_cast<int>(k), r, t});
        if (t >= 0 && lt >= 0) triangles.push_back({static_cast<int>(k), t, lt});
    }
    if (triangles.empty()) throw MeshDegenerateError("lattice region has no triangles");
    return std::make_shared<const TriMesh>(mesh_from_triangles(std::move(nodes), std::move(triangles)));
}

bool LatticeRegion::valid_heights(const std::vector<int>& h) const {
    if (h.size() != sites_.size()) return false;
    for (std::size_t k = 0; k < sites_.size(); ++k) {
        if (fixed_[k] && h[k] != fixed_height_[k]) return false;
        for (int d = 0; d < 3; ++d) {
            const int w = nbr_[6 * k + d];
            if (w < 0) continue;
            const int diff = h[w] - h[k];
            if (diff != 1 && diff != -2) return false;
        }
    }
    return true;
}

// ---------------------------------------------------------------------------
// TilingState
// ---------------------------------------------------------------------------

TilingState::TilingState(std::shared_ptr<const LatticeRegion> region, std::vector<int> heights)
    : region_(std::move(region)), h_(std::move(heights)) {
    if (!region_->valid_heights(h_)) throw InadmissibleBoundaryError("heights are not a valid stepped surface");
    flippable_.assign(h_.size(), 0);
    for (int v : region_->interior()) refresh(v);
}

bool TilingState::can_raise(int v) const {
    if (region_->is_fixed(v)) return false;
    for (int d = 0; d < 3; ++d)
        if (h_[region_->neighbour(v, d)] - h_[v] != 1 || h_[region_->neighbour(v, d + 3)] - h_[v] != 2) return false;
    return true;
}

bool TilingState::can_lower(int v) const {
    if (region_->is_fixed(v)) return false;
    for (int d = 0; d < 3; ++d)
        if (h_[region_->neighbour(v, d)] - h_[v] != -2 || h_[region_->neighbour(v, d + 3)] - h_[v] != -1) return false;
    return true;
}

void TilingState::refresh(int v) {
    const char now = (can_raise(v) || can_lower(v)) ? 1 : 0;
    if (now != flippable_[v]) {
        flippable_count_ += now ? 1 : -1;
        flippable_[v] = now;
    }
}

std::vector<int> TilingState::flippable() const {
    std::vector<int> out;
    for (std::size_t k = 0; k < flippable_.size(); ++k)
        if (flippable_[k]) out.push_back(static_cast<int>(k));
    return out;
}

bool TilingState::audit() const {
    if (!region_->valid_heights(h_)) return false;
    std::size_t count = 0;
    for (std::size_t k = 0; k < h_.size(); ++k) {
        const int v = static_cast<int>(k);
        const char expect = (!region_->is_fixed(k) && (can_raise(v) || can_lower(v))) ? 1 : 0;
        if (expect != flippable_[k]) return false;
        count += expect;
    }
    return count == flippable_count_;
}

long TilingState::volume() const {
    long cubes = 0;
    for (std::size_t k = 0; k < h_.size(); ++k) cubes += (h_[k] - region_->minimal()[k]) / 3;
    return cubes;
}

bool TilingState::update(int v, bool up) {
    if (!flippable_[v]) return false;
    if (up ? !can_raise(v) : !can_lower(v)) return false;
    h_[v] += up ? 3 : -3;
    refresh(v);
    for (int d = 0; d < 6; ++d) {
        const int w = region_->neighbour(v, d);
        if (!region_->is_fixed(w)) refresh(w);
    }
    return true;
}

TilingState init_tiling(std::shared_ptr<const LatticeRegion> region, Extension mode) {
    auto h = mode == Extension::minimal ? region->minimal() : region->maximal();
    return TilingState(std::move(region), std::move(h));
}

GlauberMove draw_move(const LatticeRegion& region, std::mt19937_64& rng) {
    const auto& interior = region.interior();
    if (interior.empty()) return {};
    const std::uint64_t r = rng();
    return {interior[(r >> 1) % interior.size()], (r & 1) != 0};
}

void glauber_step(TilingState& state, std::mt19937_64& rng) {
    const auto m = draw_move(state.region(), rng);
    if (m.site >= 0) state.update(m.site, m.up);
}

void glauber_sweeps(TilingState& state, std::mt19937_64& rng, long sweeps) {
    const long steps = sweeps * static_cast<long>(state.region().interior().size());
    for (long s = 0; s < steps; ++s) glauber_step(state, rng);
}

// ---------------------------------------------------------------------------
// Enumeration
// ---------------------------------------------------------------------------

namespace {

void extend(const LatticeRegion& region, std::vector<int>& h, std::vector<char>& assigned, std::size_t depth,
            const std::function<void(const std::vector<int>&)>& visit) {
    const auto& interior = region.interior();
    if (depth == interior.size()) {
        visit(h);
        return;
    }
    const int v = interior[depth];
    for (int value = region.minimal()[v]; value <= region.maximal()[v]; value += 3) {
        bool ok = true;
        for (int d = 0; d < 6 && ok; ++d) {
            const int w = region.neighbour(v, d);
            if (!assigned[w]) continue;
            const int diff = d < 3 ? h[w] - value : value - h[w];
            ok = diff == 1 || diff == -2;
        }
        if (!ok) continue;
        h[v] = value;
        assigned[v] = 1;
        extend(region, h, assigned, depth + 1, visit);
        assigned[v] = 0;
    }
}

void enumerate(const LatticeRegion& region, const std::function<void(const std::vector<int>&)>& visit) {
    if (region.interior().size() > kMaxEnumerationSites) {
        std::ostringstream msg;
        msg << "enumeration needs at most " << kMaxEnumerationSites << " interior sites, region has "
            << region.interior().size();
        throw TooLargeError(msg.str());
    }
    std::vector<int> h = region.minimal();
    std::vector<char> assigned(region.size(), 0);
    for (std::size_t k = 0; k < region.size(); ++k) assigned[k] = region.is_fixed(k);
    extend(region, h, assigned, 0, visit);
}

}  // namespace

std::uint64_t enumerate_tilings(const LatticeRegion& region) {
    std::uint64_t count = 0;
    enumerate(region, [&](const std::vector<int>&) { ++count; });
    return count;
}

std::vector<std::vector<int>> list_tilings(const LatticeRegion& region) {
    std::vector<std::vector<int>> out;
    enumerate(region, [&](const std::vector<int>& h) { out.push_back(h); });
    return out;
}

// ---------------------------------------------------------------------------
// Sampling
// ---------------------------------------------------------------------------

MeanHeight sample_mean_height(std::shared_ptr<const LatticeRegion> region, const SampleOptions& options) {
    if (options.samples < 1 || options.thinning < 0) throw ConfigError("sampling needs samples >= 1 and thinning >= 0");
    const long side = region->nominal_side();
    const long burn_in = options.burn_in >= 0 ? options.burn_in : 2 * side * side;
    const long cap = options.max_burn_in > 0 ? std::max(options.max_burn_in, burn_in) : std::max(50 * burn_in, 1L);
    std::mt19937_64 rng(options.seed);
    TilingState low = init_tiling(region, Extension::minimal);
    TilingState high = init_tiling(region, Extension::maximal);
    const std::size_t n_int = region->interior().size();

    MeanHeight out;
    out.samples = options.samples;
    out.thinning = options.thinning;
    long sweep = 0;
    auto coalesced = [&] { return low.heights() == high.heights(); };
    if (coalesced()) out.coalescence_sweep = 0;
    while (sweep < burn_in || (out.coalescence_sweep < 0 && sweep < cap)) {
        for (std::size_t s = 0; s < n_int; ++s) {
            const auto m = draw_move(*region, rng);
            low.update(m.site, m.up);
            high.update(m.site, m.up);
        }
        ++sweep;
        if (out.coalescence_sweep < 0 && coalesced()) out.coalescence_sweep = sweep;
    }
    out.burn_in = sweep;
    out.certified = out.coalescence_sweep >= 0;

    // After coalescence both chains are one; continue with the maximal one.
    TilingState& chain = high;
    out.mean.assign(region->size(), 0.0);
    for (long k = 0; k < options.samples; ++k) {
        if (k > 0) glauber_sweeps(chain, rng, options.thinning);
        for (std::size_t v = 0; v < region->size(); ++v) out.mean[v] += chain.heights()[v];
    }
    for (double& m : out.mean) m /= static_cast<double>(options.samples);
    return out;
}

ScalarField rescale_to_graph(const std::vector<double>& mean, const LatticeRegion& region,
                             std::shared_ptr<const TriMesh> target) {
    if (mean.size() != region.size()) throw MeshMismatchError("mean field and lattice region differ in size");
    auto lattice = region.mesh();
    Eigen::VectorXd u(static_cast<Eigen::Index>(mean.size()));
    for (std::size_t k = 0; k < mean.size(); ++k) u[static_cast<Eigen::Index>(k)] = region.spacing() * mean[k] / 3.0;
    const ScalarField graph(lattice, u);
    if (target == nullptr) return graph;
    Eigen::VectorXd out(static_cast<Eigen::Index>(target->node_count()));
    const double tol = 1e-9 * (1.0 + region.spacing() * region.nominal_side());
    for (std::size_t k = 0; k < target->node_count(); ++k) {
        const Vec2& x = target->nodes[k];
        const auto loc = lattice->locate(x, tol);
        if (!loc) {
            std::ostringstream msg;
            msg << "target node (" << x.x() << ", " << x.y() << ") is outside the lattice region";
            throw OutsideDomainError(msg.str());
        }
        const auto& tri = lattice->triangles[loc->triangle];
        double v = 0.0;
        for (int c = 0; c < 3; ++c) v += loc->bary[c] * u[tri[c]];
        out[static_cast<Eigen::Index>(k)] = v;
    }
    return ScalarField(std::move(target), std::move(out));
}

}  // namespace limitshape
