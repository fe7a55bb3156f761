#pragma once

#include "limitshape/mesh.hpp"

#include <array>
#include <cstdint>
#include <map>
#include <memory>
#include <random>
#include <string>
#include <vector>

namespace limitshape {

// ---------------------------------------------------------------------------
// Height convention
// ---------------------------------------------------------------------------
//
// A stepped surface point (x, y, z) in Z^3 projects to the lattice site
// (i, j) = (x - y, y - z), placed in the plane at i(1,0) + j(1/2, √3/2).
// Its height is h = x + y + z. Along the three forward lattice directions
//
//     d0 = (1, 0),  d1 = (-1, 1),  d2 = (0, -1)
//
// the height changes by +1 or -2, so h(v) = i - j (mod 3). Adding one cube
// raises h by 3 at one site; a site can move up only at a local minimum and
// down only at a local maximum. A region of spacing ε maps to the graph
//
//     x = ε (i + j/2, √3 j/2),   u = ε h / 3,
//
// whose slopes lie in the triangle (-2/3, 0), (1/3, ±1/√3).

inline constexpr std::array<std::array<int, 2>, 3> kLatticeSteps{{{1, 0}, {-1, 1}, {0, -1}}};

/// One-line description of the convention above, for run metadata.
[[nodiscard]] std::string lozenge_convention();

// ---------------------------------------------------------------------------
// LatticeRegion
// ---------------------------------------------------------------------------

class LatticeRegion {
public:
    /// `sites` must be connected and simply connected; every site missing a
    /// lattice neighbour must appear in `fixed`, whose heights must extend to
    /// a tiling. Throws InadmissibleBoundaryError otherwise.
    LatticeRegion(std::vector<std::array<int, 2>> sites, const std::map<std::array<int, 2>, int>& fixed,
                  double spacing = 1.0);

    /// Boxed a x b x c hexagon with the empty-box boundary heights and spacing 1/scale.
    static LatticeRegion hexagon(int a, int b, int c, double scale = 1.0);

    [[nodiscard]] std::size_t size() const noexcept { return sites_.size(); }
    [[nodiscard]] const std::array<int, 2>& site(std::size_t k) const { return sites_[k]; }
    [[nodiscard]] bool is_fixed(std::size_t k) const { return fixed_[k] != 0; }
    [[nodiscard]] const std::vector<int>& interior() const noexcept { return interior_; }
    [[nodiscard]] double spacing() const noexcept { return spacing_; }
    /// max(a, b, c) for hexagons, round(sqrt(size / 3)) otherwise.
    [[nodiscard]] int nominal_side() const noexcept { return side_; }
    /// Neighbour along +d_k (k < 3) or -d_{k-3}; -1 when absent.
    [[nodiscard]] int neighbour(std::size_t k, int dir) const { return nbr_[6 * k + dir]; }
    /// Site index, -1 when (i, j) is not in the region.
    [[nodiscard]] int index(int i, int j) const;

    /// Pointwise minimal and maximal height extensions of the fixed heights.
    [[nodiscard]] const std::vector<int>& minimal() const noexcept { return min_; }
    [[nodiscard]] const std::vector<int>& maximal() const noexcept { return max_; }

    /// Plane position of site k (times the spacing).
    [[nodiscard]] Vec2 position(std::size_t k) const;
    /// The region's lattice triangles as a mesh whose nodes are the sites in order.
    [[nodiscard]] std::shared_ptr<const TriMesh> mesh() const;

    /// Every nearest-neighbour difference in the step set and fixed sites untouched.
    [[nodiscard]] bool valid_heights(const std::vector<int>& h) const;

private:
    std::vector<std::array<int, 2>> sites_;
    std::vector<char> fixed_;
    std::vector<int> fixed_height_;
    std::vector<int> interior_;
    std::vector<int> nbr_;
    std::vector<int> min_, max_;
    double spacing_ = 1.0;
    int side_ = 0;
    int i0_ = 0, j0_ = 0, width_ = 0, height_ = 0;
    std::vector<int> lookup_;
    std::vector<Vec2> outline_;
};

// ---------------------------------------------------------------------------
// TilingState and dynamics
// ---------------------------------------------------------------------------

enum class Extension { minimal, maximal };

class TilingState {
public:
    TilingState(std::shared_ptr<const LatticeRegion> region, std::vector<int> heights);

    [[nodiscard]] const LatticeRegion& region() const noexcept { return *region_; }
    [[nodiscard]] const std::vector<int>& heights() const noexcept { return h_; }
    [[nodiscard]] bool can_raise(int site) const;
    [[nodiscard]] bool can_lower(int site) const;
    /// Interior sites that can move; maintained incrementally.
    [[nodiscard]] std::vector<int> flippable() const;
    [[nodiscard]] std::size_t flippable_count() const noexcept { return flippable_count_; }
    /// Recomputes the flippable set and validity from scratch; true when both agree.
    [[nodiscard]] bool audit() const;
    /// Number of cubes above the minimal extension.
    [[nodiscard]] long volume() const;

    /// Heat-bath move at a site: up with probability 1/2 when allowed, down
    /// with probability 1/2 when allowed (at most one of the two ever is).
    /// Returns true when the height changed.
    bool update(int site, bool up);

private:
    void refresh(int site);

    std::shared_ptr<const LatticeRegion> region_;
    std::vector<int> h_;
    std::vector<char> flippable_;
    std::size_t flippable_count_ = 0;
};

[[nodiscard]] TilingState init_tiling(std::shared_ptr<const LatticeRegion> region, Extension mode);

/// One uniformly random interior site with a fair coin, both drawn from one
/// 64-bit output: bit 0 is the coin, the rest picks the site.
struct GlauberMove {
    int site = -1;
    bool up = false;
};
[[nodiscard]] GlauberMove draw_move(const LatticeRegion& region, std::mt19937_64& rng);

/// Applies one draw_move to the state.
void glauber_step(TilingState& state, std::mt19937_64& rng);
/// Sweep = interior-site-count steps.
void glauber_sweeps(TilingState& state, std::mt19937_64& rng, long sweeps);

// ---------------------------------------------------------------------------
// Enumeration and sampling
// ---------------------------------------------------------------------------

inline constexpr std::size_t kMaxEnumerationSites = 30;

/// Exact number of tilings by depth-first extension over interior sites in
/// index order. Throws TooLargeError above kMaxEnumerationSites interior sites.
[[nodiscard]] std::uint64_t enumerate_tilings(const LatticeRegion& region);
/// All tilings as height vectors, in the depth-first order of enumerate_tilings.
[[nodiscard]] std::vector<std::vector<int>> list_tilings(const LatticeRegion& region);

struct SampleOptions {
    long burn_in = -1;      // sweeps; -1 picks 2 * side^2
    long samples = 50;
    long thinning = 10;     // sweeps between samples
    std::uint64_t seed = 1;
    long max_burn_in = 0;   // cap on the certified burn-in; 0 picks 50 * burn_in
};

struct MeanHeight {
    std::vector<double> mean;  // per site, lattice height units
    long burn_in = 0;          // sweeps actually run before the first sample
    long coalescence_sweep = -1;  // sweep at which the minimal and maximal chains met, -1 if never
    bool certified = false;
    long samples = 0;
    long thinning = 0;
};

/// Runs the minimal and maximal chains with shared randomness for the
/// burn-in, extending it until they coalesce (up to max_burn_in), then
/// averages `samples` states of the coalesced chain taken every `thinning`
/// sweeps. Deterministic given the seed.
[[nodiscard]] MeanHeight sample_mean_height(std::shared_ptr<const LatticeRegion> region, const SampleOptions& options);

/// u = ε h / 3 over x = ε (lattice position), interpolated to the target mesh.
/// Throws OutsideDomainError when a target node is outside the lattice region.
[[nodiscard]] ScalarField rescale_to_graph(const std::vector<double>& mean, const LatticeRegion& region,
                                           std::shared_ptr<const TriMesh> target);

}  // namespace limitshape
