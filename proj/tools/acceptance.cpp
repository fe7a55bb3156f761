// Acceptance run: one PASS/FAIL line per criterion, exit status 1 when any fails.
//
//   acceptance [--work <dir>] [--verbose]

#include "limitshape/cli.hpp"
#include "limitshape/diagnostics.hpp"
#include "limitshape/obstacles.hpp"
#include "limitshape/sampler.hpp"
#include "limitshape/solver.hpp"
#include "limitshape/tension.hpp"

#include <CLI11.hpp>
#include <boost/math/quadrature/tanh_sinh.hpp>

#include <chrono>
#include <cmath>
#include <deque>
#include <fstream>
#include <iostream>
#include <numbers>
#include <random>
#include <sstream>

using namespace limitshape;
namespace fs = std::filesystem;

namespace {

// ---------------------------------------------------------------------------
// Pipeline plumbing
// ---------------------------------------------------------------------------

struct Pipeline {
    std::string command;
    std::string config;
    fs::path dir;
    int status = -1;
    double seconds = 0.0;
};

fs::path work_root;
std::deque<Pipeline> pipelines;  // stable references
bool verbose = false;

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

int execute(const std::string& command, const std::string& config, const fs::path& dir, double* seconds = nullptr) {
    fs::remove_all(dir);
    std::ostringstream diag;
    const auto t0 = std::chrono::steady_clock::now();
    const int status = run(command, RunConfig::parse(config), dir, diag);
    if (seconds) *seconds = seconds_since(t0);
    if (verbose || status != kExitOk) std::cerr << "[" << dir.filename().string() << "] " << diag.str();
    return status;
}

const Pipeline& pipeline(const std::string& name, const std::string& command, const std::string& config) {
    Pipeline p{command, config, work_root / name};
    p.status = execute(command, config, p.dir, &p.seconds);
    pipelines.push_back(p);
    return pipelines.back();
}

std::map<std::string, std::string> summary(const fs::path& dir) {
    std::map<std::string, std::string> out;
    std::ifstream in(dir / "summary.txt");
    std::string line;
    while (std::getline(in, line)) {
        const auto eq = line.find(" = ");
        if (eq != std::string::npos) out[line.substr(0, eq)] = line.substr(eq + 3);
    }
    return out;
}

double metric(const fs::path& dir, const std::string& key) {
    const auto s = summary(dir);
    const auto it = s.find(key);
    return it == s.end() ? std::nan("") : std::stod(it->second);
}

std::vector<std::vector<double>> csv_rows(const fs::path& path) {
    std::ifstream in(path);
    std::string line;
    std::getline(in, line);
    std::vector<std::vector<double>> rows;
    while (std::getline(in, line)) {
        std::vector<double> row;
        std::istringstream cells(line);
        std::string cell;
        while (std::getline(cells, cell, ',')) row.push_back(std::stod(cell));
        rows.push_back(row);
    }
    return rows;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

// ---------------------------------------------------------------------------
// Reporting
// ---------------------------------------------------------------------------

int failures = 0;
std::map<int, std::string> lines;

void verdict(int id, const std::string& name, bool pass, const std::string& detail) {
    failures += !pass;
    std::ostringstream s;
    s << "criterion " << std::setw(2) << id << ": " << (pass ? "PASS" : "FAIL") << "  " << name << "  (" << detail << ")";
    lines[id] = s.str();
    std::cerr << s.str() << std::endl;
}

std::string fmt(double v) {
    std::ostringstream s;
    s << std::setprecision(4) << v;
    return s.str();
}

// Largest violation of lower <= u <= upper over the nodes of a solve.
double sandwich_violation(const fs::path& solve_dir, const std::string& config, const std::string& name) {
    const fs::path obs_dir = work_root / (name + "_obstacles");
    Pipeline p{"obstacles", config, obs_dir};
    p.status = execute("obstacles", config, obs_dir, &p.seconds);
    pipelines.push_back(p);
    if (p.status != kExitOk) return std::numeric_limits<double>::infinity();
    const auto field = csv_rows(solve_dir / "field.nodes.csv");
    const auto box = csv_rows(obs_dir / "obstacles.csv");
    if (field.size() != box.size()) return std::numeric_limits<double>::infinity();
    double worst = 0.0;
    for (std::size_t k = 0; k < field.size(); ++k) {
        if (field[k][1] != box[k][1] || field[k][2] != box[k][2]) return std::numeric_limits<double>::infinity();
        worst = std::max({worst, box[k][3] - field[k][3], field[k][3] - box[k][4]});
    }
    return worst;
}

std::vector<double> sandwich_record;

// ---------------------------------------------------------------------------
// Configurations
// ---------------------------------------------------------------------------

const std::string linear_cfg =
    "[domain]\nshape = rectangle\nlo = 0 0\nhi = 1 1\n[mesh]\nnx = 64\n[tension]\nmodel = quadratic\n"
    "[polygon]\npreset = square\nhalf_width = 1\n[boundary]\nkind = linear\nslope = 0.3 -0.2\n";

const std::string hexagon_cfg =
    "[domain]\nshape = hexagon\nsides = 24 24 24\n[mesh]\nkind = hexagon\nrefine = 1\n[tension]\nmodel = lozenge\n"
    "[boundary]\nkind = box\n[tolerances]\nearly_stop = false\n";

const std::string sample_cfg =
    "[run]\nseed = 1\n[domain]\nshape = hexagon\nsides = 24 24 24\n[sampler]\nsamples = 50\nthinning = 20\n";

std::string smooth_cfg(int n) {
    return "[domain]\nshape = rectangle\n[mesh]\nnx = " + std::to_string(n) +
           "\n[tension]\nmodel = quadratic\n[boundary]\nkind = polynomial\ncoefficients = 0 0 0 0.3 0 0.1\n";
}

// ---------------------------------------------------------------------------
// Criteria
// ---------------------------------------------------------------------------

void linear_exactness() {
    const auto& p = pipeline("c1_linear", "solve", linear_cfg);
    double worst = std::numeric_limits<double>::infinity(), el = worst;
    if (p.status == kExitOk) {
        worst = 0.0;
        for (const auto& r : csv_rows(p.dir / "field.nodes.csv"))
            worst = std::max(worst, std::abs(r[3] - (0.3 * r[1] - 0.2 * r[2])));
        el = metric(p.dir, "el_residual_norm");
    }
    sandwich_record.push_back(sandwich_violation(p.dir, linear_cfg, "c1_linear"));
    verdict(1, "linear-solution exactness", worst <= 1e-8 && el <= 1e-8 && p.seconds < 5.0,
            "max |u - p0.x| " + fmt(worst) + ", el residual " + fmt(el) + ", " + fmt(p.seconds) + " s");
}

// Minimum of |x - y|_1 over y on the boundary of the unit square: dense scan,
// then golden-section refinement on the best bracket of each side.
double square_distance_oracle(const Vec2& x) {
    const std::array<Vec2, 4> c{Vec2(0, 0), Vec2(1, 0), Vec2(1, 1), Vec2(0, 1)};
    double best = std::numeric_limits<double>::infinity();
    for (int s = 0; s < 4; ++s) {
        const Vec2 a = c[s], b = c[(s + 1) % 4];
        auto f = [&](double t) { return (x - (a + t * (b - a))).lpNorm<1>(); };
        const int n = 2000;
        int arg = 0;
        for (int k = 1; k <= n; ++k)
            if (f(static_cast<double>(k) / n) < f(static_cast<double>(arg) / n)) arg = k;
        double lo = std::max(0.0, (arg - 1.0) / n), hi = std::min(1.0, (arg + 1.0) / n);
        const double g = (std::sqrt(5.0) - 1) / 2;
        for (int it = 0; it < 100; ++it) {
            const double m1 = hi - g * (hi - lo), m2 = lo + g * (hi - lo);
            if (f(m1) <= f(m2)) hi = m2;
            else lo = m1;
        }
        best = std::min(best, f(0.5 * (lo + hi)));
    }
    return best;
}

void obstacle_sandwich() {
    const std::vector<Vec2> loop{{0, 0}, {1, 0}, {1, 1}, {0, 1}, {0, 0}};
    const Obstacles obs(BoundaryData::linear(loop, Vec2::Zero()), GradientPolygon::square());
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    double err = 0.0;
    for (int k = 0; k < 1000; ++k) {
        const Vec2 x(unit(rng), unit(rng));
        const double d = square_distance_oracle(x);
        err = std::max({err, std::abs(obs.upper(x) - d), std::abs(obs.lower(x) + d)});
    }
    const double sandwich = *std::max_element(sandwich_record.begin(), sandwich_record.end());
    verdict(2, "obstacle sandwich and attainment", sandwich <= 1e-8 && err <= 1e-6,
            "worst sandwich violation " + fmt(sandwich) + " over " + std::to_string(sandwich_record.size()) +
                " solves, obstacle oracle error " + fmt(err));
}

void neighbourhood_property() {
    const auto& p = pipeline("c3_hexagon", "solve", hexagon_cfg);
    std::vector<double> excess;
    bool ok = p.status == kExitOk;
    if (ok)
        for (const auto& r : csv_rows(p.dir / "stages.csv")) excess.push_back(r[2]);
    ok = ok && excess.size() == 8;
    bool monotone = ok;
    for (std::size_t k = 1; k < excess.size(); ++k) monotone = monotone && excess[k] <= excess[k - 1];
    const double last = excess.empty() ? std::nan("") : excess.back();
    std::string seq;
    for (double e : excess) seq += (seq.empty() ? "" : " ") + fmt(e);
    sandwich_record.push_back(sandwich_violation(p.dir, hexagon_cfg, "c3_hexagon"));
    verdict(3, "gauge excess along the penalty schedule", ok && monotone && last <= 0.05,
            "m = 1..8: " + seq + (monotone ? ", non-increasing" : ", NOT monotone"));
}

void uniqueness() {
    const auto& a = pipeline("c4_zero", "solve", hexagon_cfg + "[run]\ninitial = zero\n");
    const auto& b = pipeline("c4_upper", "solve", hexagon_cfg + "[run]\ninitial = upper\n");
    double diff = std::numeric_limits<double>::infinity();
    if (a.status == kExitOk && b.status == kExitOk) {
        const auto ra = csv_rows(a.dir / "field.nodes.csv"), rb = csv_rows(b.dir / "field.nodes.csv");
        if (ra.size() == rb.size()) {
            diff = 0.0;
            for (std::size_t k = 0; k < ra.size(); ++k) diff = std::max(diff, std::abs(ra[k][3] - rb[k][3]));
        }
    }
    sandwich_record.push_back(sandwich_violation(a.dir, hexagon_cfg, "c4_zero"));
    sandwich_record.push_back(sandwich_violation(b.dir, hexagon_cfg, "c4_upper"));
    verdict(4, "uniqueness from two initializations", diff <= 1e-6, "max nodal difference " + fmt(diff));
}

void lozenge_tension() {
    // Λ(θ) = -∫_0^θ log|2 sin t| dt by tanh-sinh quadrature.
    boost::math::quadrature::tanh_sinh<double> ts;
    const double theta = std::numbers::pi / 3;
    const double lob = -ts.integrate([](double t) { return std::log(2 * std::sin(t)); }, 0.0, theta);
    const double oracle = -3.0 / std::numbers::pi * lob;

    const LozengeTension F;
    const auto& N = F.polygon();
    const double centre = F.eval((N.vertex(0) + N.vertex(1) + N.vertex(2)) / 3.0, 0).value;

    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    double edge = 0.0;
    for (int k = 0; k < 1000; ++k) {
        const int s = static_cast<int>(rng() % 3);
        const Vec2 p = N.vertex(s) + unit(rng) * (N.vertex(s + 1) - N.vertex(s));
        edge = std::max(edge, std::abs(F.eval(p, 0).value));
    }
    auto inside = [&] {
        double a = unit(rng), b = unit(rng);
        if (a + b > 1) a = 1 - a, b = 1 - b;
        return Vec2(N.vertex(0) + a * (N.vertex(1) - N.vertex(0)) + b * (N.vertex(2) - N.vertex(0)));
    };
    int broken = 0;
    for (int k = 0; k < 10000; ++k) {
        const Vec2 p = inside(), q = inside();
        const double mid = F.eval(0.5 * (p + q), 0).value;
        if (mid > 0.5 * (F.eval(p, 0).value + F.eval(q, 0).value) + 1e-12) ++broken;
    }
    verdict(5, "lozenge tension", std::abs(centre - oracle) <= 1e-6 && edge <= 1e-6 && broken == 0,
            "centre " + format_real(centre) + " vs quadrature " + format_real(oracle) + ", max |F| on the boundary " +
                fmt(edge) + ", " + std::to_string(broken) + " midpoint failures in 10^4");
}

void sampler_exactness() {
    const auto t0 = std::chrono::steady_clock::now();
    const auto& p1 = pipeline("c6_enumerate_111", "enumerate", "[domain]\nshape = hexagon\nsides = 1 1 1\n");
    const auto& p2 = pipeline("c6_enumerate_222", "enumerate", "[domain]\nshape = hexagon\nsides = 2 2 2\n");
    auto s1 = summary(p1.dir), s2 = summary(p2.dir);
    const bool counts = s1["tilings"] == "2" && s1["macmahon"] == "2" && s2["tilings"] == "20" && s2["macmahon"] == "20";

    auto region = std::make_shared<const LatticeRegion>(LatticeRegion::hexagon(2, 2, 2));
    std::map<std::vector<int>, long> freq;
    for (const auto& h : list_tilings(*region)) freq[h] = 0;
    auto state = init_tiling(region, Extension::minimal);
    std::mt19937_64 rng(2024);
    glauber_sweeps(state, rng, 100);
    const long sweeps = 1000000, thin = 5;
    long recorded = 0, stray = 0;
    for (long k = 1; k <= sweeps; ++k) {
        glauber_sweeps(state, rng, 1);
        if (k % thin) continue;
        auto it = freq.find(state.heights());
        if (it == freq.end()) ++stray;
        else ++it->second, ++recorded;
    }
    const double expected = static_cast<double>(recorded) / static_cast<double>(freq.size());
    double chi2 = 0.0;
    for (const auto& [h, c] : freq) chi2 += (c - expected) * (c - expected) / expected;
    const double dof = static_cast<double>(freq.size()) - 1, bound = dof + 3 * std::sqrt(2 * dof);
    const double secs = seconds_since(t0);
    verdict(6, "sampler exactness", counts && stray == 0 && chi2 <= bound && secs < 60,
            "counts " + s1["tilings"] + " and " + s2["tilings"] + ", chi2 " + fmt(chi2) + " <= " + fmt(bound) +
                " over 10^6 sweeps, " + fmt(secs) + " s");
}

void limit_shape_convergence() {
    const auto& sample = pipeline("c7_sample", "sample", sample_cfg);
    const auto& solve = *std::find_if(pipelines.begin(), pipelines.end(),
                                      [](const Pipeline& p) { return p.dir.filename() == "c3_hexagon"; });
    const auto& cmp = pipeline("c7_compare", "compare",
                               "[compare]\na = " + (solve.dir / "field").string() +
                                   "\nb = " + (sample.dir / "graph").string() + "\n");
    const auto& diag = pipeline("c7_diagnose", "diagnose",
                                hexagon_cfg + "[diagnose]\nfacet_tol = 0.02\nfield = " + (solve.dir / "field").string() + "\n");
    const double secs = sample.seconds + solve.seconds + cmp.seconds + diag.seconds;
    const double l2 = metric(cmp.dir, "l2"), linf = metric(cmp.dir, "linf");
    const auto certified = summary(sample.dir)["certified"];
    std::map<int, int> per_vertex;
    {
        std::ifstream in(diag.dir / "facets.txt");
        std::string line;
        while (std::getline(in, line))
            if (line.rfind("vertex = ", 0) == 0) ++per_vertex[std::stoi(line.substr(9))];
    }
    const double facets = metric(diag.dir, "facets"), passing = metric(diag.dir, "facets_passing");
    bool corners = per_vertex.size() == 3;
    for (const auto& [v, n] : per_vertex) corners = corners && n == 2;
    verdict(7, "sampler mean against the lozenge solve",
            sample.status == kExitOk && certified == "true" && l2 <= 0.05 && linf <= 0.10 && facets == 6 &&
                passing == 6 && corners && secs <= 900,
            "L2 " + fmt(l2) + ", Linf " + fmt(linf) + ", certified " + certified + ", facets " + fmt(facets) +
                " (" + fmt(passing) + " convex/concave, two per vertex: " + (corners ? "yes" : "no") + "), " +
                fmt(secs) + " s");
}

void jump_structure() {
    const auto N = GradientPolygon::square();
    const Vec2 p1 = N.vertex(1), p2 = N.vertex(2);  // adjacent: side 1
    auto mesh = std::make_shared<const TriMesh>(rectangle_mesh({-1, -1}, {1, 1}, 128, 128));
    const auto u = ScalarField::interpolate(mesh, [&](const Vec2& x) { return std::max(p1.dot(x), p2.dot(x)); });
    const auto rep = detect_jump_segments(u, N, 0.5);
    const double tol = 4 * mesh->mesh_size() * u.lipschitz();
    bool ok = rep.segments.size() == 1;
    std::string detail = std::to_string(rep.segments.size()) + " segment(s)";
    if (ok) {
        const auto& s = rep.segments[0];
        ok = s.compliant && s.side == 1 && s.angle_deviation <= 1.0 && s.reach_start && s.reach_end &&
             s.affine_residual <= tol;
        detail += ", side " + std::to_string(s.side) + ", angle deviation " + fmt(s.angle_deviation) +
                  " deg, reach " + (s.reach_start && s.reach_end ? "both ends" : "incomplete") + ", residual " +
                  fmt(s.affine_residual) + " <= " + fmt(tol);
    }
    verdict(8, "jump segment structure", ok, detail);
}

void caccioppoli() {
    // exact zero on affine fields
    auto mesh = std::make_shared<const TriMesh>(rectangle_mesh({0, 0}, {1, 1}, 32, 32));
    const auto lin = ScalarField::interpolate(mesh, [](const Vec2& x) { return 0.7 * x.x() - 0.4 * x.y() + 0.1; });
    const Disk w{{0.5, 0.5}, 0.4};
    double linear = 0.0;
    for (const Vec2& e : {Vec2(1, 0), Vec2(0, 1), Vec2(0.6, 0.8)})
        linear = std::max(linear, caccioppoli_energy(lin, {e, 0.0, 1.0, w}));

    // refinement on the smooth quadratic solve
    const std::string diag_keys = "[diagnose]\nwindow = 0.5 0.5 0.4\ndirection = 1 0\nc0 = 0.1\nc1 = 0.3\n";
    std::array<double, 2> energy{};
    std::array<fs::path, 2> fields;
    for (int k = 0; k < 2; ++k) {
        const int n = 32 << k;
        const auto& s = pipeline("c9_smooth_" + std::to_string(n), "solve", smooth_cfg(n));
        sandwich_record.push_back(sandwich_violation(s.dir, smooth_cfg(n), "c9_smooth_" + std::to_string(n)));
        fields[k] = s.dir / "field";
        const auto& d = pipeline("c9_diagnose_" + std::to_string(n), "diagnose",
                                 smooth_cfg(n) + diag_keys + "field = " + fields[k].string() + "\n");
        energy[k] = metric(d.dir, "caccioppoli_energy");
    }
    const bool cauchy = energy[0] > 0 && std::abs(energy[1] - energy[0]) <= 0.2 * energy[0];

    // Widening the band [c0, c1] to [c0, c0 + 2 (c1 - c0)] quarters sup|G'|^2.
    // Bands sweep the range of u_e over the window, including ones entering it from below.
    const auto u = read_field(fields[1]);
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    {
        const auto g = recovered_gradient(u);
        for (std::size_t k = 0; k < g.size(); ++k)
            if ((u.mesh().nodes[k] - w.center).norm() <= w.radius) lo = std::min(lo, g[k].x()), hi = std::max(hi, g[k].x());
    }
    const double dir = directional_dirichlet(u, Vec2(1, 0), w);
    double worst_growth = 0.0, worst_c0 = 0.0, worst_width = 0.0, slope_excess = 0.0;
    for (int i = -2; i < 8; ++i)
        for (double frac : {0.1, 0.25, 0.5}) {
            const double width = frac * (hi - lo), c0 = lo + i * (hi - lo) / 8;
            const CaccioppoliParams narrow{Vec2(1, 0), c0, c0 + width, w}, wide{Vec2(1, 0), c0, c0 + 2 * width, w};
            const double en = caccioppoli_energy(u, narrow), ew = caccioppoli_energy(u, wide);
            const double allowed = std::pow(cutoff_slope(narrow.c0, narrow.c1) / cutoff_slope(wide.c0, wide.c1), 2);
            if (en > 0 && ew / en / allowed > worst_growth) {
                worst_growth = ew / en / allowed;
                worst_c0 = c0;
                worst_width = width;
            }
            for (const auto& p : {narrow, wide})
                slope_excess = std::max(slope_excess, caccioppoli_energy(u, p) / (std::pow(cutoff_slope(p.c0, p.c1), 2) * dir));
        }
    verdict(9, "Caccioppoli sanity", linear <= 1e-20 && cauchy && worst_growth <= 1.0 && slope_excess <= 1.0 + 1e-12,
            "affine " + fmt(linear) + ", refinement " + fmt(energy[0]) + " -> " + fmt(energy[1]) +
                ", widening growth / |G'|^2 ratio up to " + fmt(worst_growth) + " at band [" + fmt(worst_c0) + ", " +
                fmt(worst_c0 + worst_width) + "] of u_e range [" + fmt(lo) + ", " + fmt(hi) +
                "], energy / (sup|G'|^2 dirichlet) up to " + fmt(slope_excess));
}

void determinism() {
    std::size_t files = 0;
    std::vector<std::string> differing;
    const std::size_t first_runs = pipelines.size();
    for (std::size_t k = 0; k < first_runs; ++k) {
        const Pipeline p = pipelines[k];
        const fs::path again = p.dir.string() + "_rerun";
        execute(p.command, p.config, again);
        const std::string manifest = slurp(p.dir / "manifest.txt");
        if (manifest != slurp(again / "manifest.txt")) differing.push_back(p.dir.filename().string() + "/manifest.txt");
        std::istringstream in(manifest);
        std::string digest, name;
        std::uintmax_t bytes = 0;
        while (in >> digest >> bytes >> name) {
            ++files;
            if (sha256_file(p.dir / name) != digest || slurp(p.dir / name) != slurp(again / name))
                differing.push_back(p.dir.filename().string() + "/" + name);
        }
    }
    std::string detail = std::to_string(first_runs) + " pipelines, " + std::to_string(files) + " files";
    if (!differing.empty()) detail += ", differing: " + differing.front();
    verdict(10, "determinism", differing.empty() && files > 0, detail);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Acceptance criteria"};
    std::string work = (fs::temp_directory_path() / "limitshape_acceptance").string();
    app.add_option("--work", work, "scratch directory for pipeline outputs")->capture_default_str();
    app.add_flag("--verbose", verbose, "echo pipeline diagnostics");
    CLI11_PARSE(app, argc, argv);
    work_root = work;
    fs::create_directories(work_root);

    const auto t0 = std::chrono::steady_clock::now();
    try {
        linear_exactness();
        neighbourhood_property();
        uniqueness();
        lozenge_tension();
        sampler_exactness();
        limit_shape_convergence();
        jump_structure();
        caccioppoli();
        obstacle_sandwich();
        determinism();
    } catch (const std::exception& e) {
        std::cout << "aborted: " << e.what() << std::endl;
        return 2;
    }
    for (const auto& [id, line] : lines) std::cout << line << '\n';
    std::cout << (failures ? std::to_string(failures) + " criterion(s) failed" : std::string("all criteria passed"))
              << " in " << fmt(seconds_since(t0)) << " s" << std::endl;
    return failures ? 1 : 0;
}
