#include "limitshape/cli.hpp"

#include "limitshape/diagnostics.hpp"
#include "limitshape/obstacles.hpp"
#include "limitshape/sampler.hpp"
#include "limitshape/solver.hpp"
#include "limitshape/tension.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <openssl/evp.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>

namespace limitshape {

namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// Schema
// ---------------------------------------------------------------------------

const std::map<std::string, std::pair<std::string, std::string>>& config_schema() {
    static const std::map<std::string, std::pair<std::string, std::string>> schema{
        {"run.seed", {"1", "seed of the sampler's random stream"}},
        {"run.initial", {"midpoint", "solver start: midpoint, zero, upper or lower"}},
        {"run.pgm", {"false", "also emit 16-bit PGM rasters of fields"}},
        {"run.pgm_width", {"256", "raster width in pixels"}},

        {"domain.shape", {"rectangle", "rectangle, hexagon or polygon"}},
        {"domain.lo", {"0 0", "rectangle lower-left corner"}},
        {"domain.hi", {"1 1", "rectangle upper-right corner"}},
        {"domain.sides", {"2 2 2", "hexagon box sides a b c"}},
        {"domain.scale", {"0", "hexagon lattice units per unit length; 0 picks max(a,b,c)"}},
        {"domain.vertices", {"", "polygon vertices x1 y1 x2 y2 ... counterclockwise"}},

        {"mesh.kind", {"auto", "auto, rectangle, hexagon or delaunay"}},
        {"mesh.nx", {"32", "rectangle cells along x"}},
        {"mesh.ny", {"0", "rectangle cells along y; 0 copies nx"}},
        {"mesh.refine", {"1", "hexagon lattice refinement"}},
        {"mesh.h", {"0.05", "delaunay target edge length"}},

        {"polygon.preset", {"auto", "auto, square, lozenge or vertices"}},
        {"polygon.half_width", {"1", "square half width"}},
        {"polygon.vertices", {"", "vertices of N x1 y1 ..."}},
        {"polygon.interior", {"", "interior point z0 of N; empty picks the default"}},

        {"tension.model", {"quadratic", "quadratic, lozenge or custom-singular"}},
        {"tension.weight", {"1", "quadratic weight or base weight"}},
        {"tension.singular", {"", "singular terms qx qy weight exponent; separated by ';'"}},

        {"boundary.kind", {"linear", "linear, zero, polynomial, values or box"}},
        {"boundary.slope", {"0 0", "linear data slope p0"}},
        {"boundary.offset", {"0", "linear data constant"}},
        {"boundary.coefficients", {"0 0 0 0 0 0", "polynomial c0 + c1 x + c2 y + c3 x^2 + c4 xy + c5 y^2"}},
        {"boundary.values", {"", "one value per domain vertex"}},
        {"boundary.density", {"0", "boundary sample spacing; 0 picks perimeter/400"}},

        {"schedule.first", {"1", "first penalty index m"}},
        {"schedule.last", {"8", "last penalty index m"}},
        {"schedule.convexity_floor_base", {"4", "eps_m = base^-m"}},
        {"schedule.radius_factor", {"0.5", "r_m = factor 2^-m depth(N)"}},

        {"tolerances.kkt", {"0", "projected-gradient tolerance; 0 picks 1e-8 area"}},
        {"tolerances.constraint", {"0.05", "max gauge excess for early stop"}},
        {"tolerances.energy", {"1e-9", "relative energy change for early stop"}},
        {"tolerances.boundary_layer", {"0", "inset of K; 0 picks 4h"}},
        {"tolerances.max_newton", {"200", "Newton iterations per stage"}},
        {"tolerances.early_stop", {"true", "stop the schedule early when converged"}},

        {"sampler.burn_in", {"-1", "sweeps; -1 picks 2 side^2"}},
        {"sampler.samples", {"50", "states averaged"}},
        {"sampler.thinning", {"10", "sweeps between samples"}},
        {"sampler.max_burn_in", {"0", "cap for the coalescence wait; 0 picks 50 burn_in"}},

        {"compare.a", {"", "field stem (reference mesh)"}},
        {"compare.b", {"", "field stem"}},

        {"diagnose.field", {"", "field stem; empty solves first"}},
        {"diagnose.radii", {"0.05 0.1 0.2", "modulus radii, increasing"}},
        {"diagnose.max_centres", {"300", "sample centres for the moduli"}},
        {"diagnose.facet_tol", {"0.02", "threshold on the distance of grad u to p_i for facets"}},
        {"diagnose.geometric_tol", {"0", "facet verdict tolerance; 0 picks 2h"}},
        {"diagnose.jump_tol", {"0.5", "gradient jump threshold across edges"}},
        {"diagnose.angle_tolerance", {"5", "degrees"}},
        {"diagnose.window", {"", "Caccioppoli window cx cy r; empty picks an inscribed disk"}},
        {"diagnose.direction", {"1 0", "Caccioppoli direction e"}},
        {"diagnose.c0", {"0", "cutoff start"}},
        {"diagnose.c1", {"1", "cutoff end"}},

        {"tension-eval.points", {"", "gradients px py; separated by ';'"}},
        {"tension-eval.grid", {"0", "n x n grid over the bounding box of N (points inside N)"}},
        {"tension-eval.order", {"1", "0 value, 1 gradient, 2 hessian"}},
    };
    return schema;
}

RunConfig::RunConfig() {
    for (const auto& [k, v] : config_schema()) values_[k] = v.first;
}

void RunConfig::set(const std::string& key, const std::string& value) {
    if (!config_schema().count(key)) throw ConfigError("unknown config key '" + key + "'");
    values_[key] = value;
    explicit_[key] = true;
}

void RunConfig::apply_override(const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos) throw ConfigError("override '" + assignment + "' is not key=value");
    auto trim = [](std::string s) {
        const auto a = s.find_first_not_of(" \t"), b = s.find_last_not_of(" \t");
        return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
    };
    set(trim(assignment.substr(0, eq)), trim(assignment.substr(eq + 1)));
}

RunConfig RunConfig::parse(const std::string& text) {
    boost::property_tree::ptree tree;
    std::istringstream in(text);
    try {
        boost::property_tree::ini_parser::read_ini(in, tree);
    } catch (const boost::property_tree::ini_parser_error& e) {
        throw ConfigError(std::string("config parse error: ") + e.what());
    }
    RunConfig c;
    for (const auto& [section, body] : tree) {
        if (body.empty()) throw ConfigError("config key '" + section + "' is outside any [section]");
        for (const auto& [key, value] : body) c.set(section + "." + key, value.get_value<std::string>());
    }
    return c;
}

RunConfig RunConfig::load(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read config " + path.string());
    std::ostringstream s;
    s << in.rdbuf();
    return parse(s.str());
}

const std::string& RunConfig::text(const std::string& key) const {
    auto it = values_.find(key);
    if (it == values_.end()) throw ConfigError("unknown config key '" + key + "'");
    return it->second;
}

double RunConfig::real(const std::string& key) const {
    const auto v = reals(key, 1);
    return v[0];
}

long RunConfig::integer(const std::string& key) const {
    const std::string& s = text(key);
    std::size_t used = 0;
    long v = 0;
    try {
        v = std::stol(s, &used);
    } catch (const std::exception&) {
        throw ConfigError(key + " = '" + s + "' is not an integer");
    }
    if (used != s.size()) throw ConfigError(key + " = '" + s + "' is not an integer");
    return v;
}

bool RunConfig::flag(const std::string& key) const {
    const std::string& s = text(key);
    if (s == "true" || s == "1" || s == "yes") return true;
    if (s == "false" || s == "0" || s == "no") return false;
    throw ConfigError(key + " = '" + s + "' is not a boolean");
}

std::vector<double> RunConfig::reals(const std::string& key, std::size_t count) const {
    std::istringstream in(text(key));
    std::vector<double> out;
    std::string tok;
    while (in >> tok) {
        std::size_t used = 0;
        double v = 0;
        try {
            v = std::stod(tok, &used);
        } catch (const std::exception&) {
            throw ConfigError(key + ": '" + tok + "' is not a number");
        }
        if (used != tok.size() || !std::isfinite(v)) throw ConfigError(key + ": '" + tok + "' is not a finite number");
        out.push_back(v);
    }
    if (count > 0 && out.size() != count) {
        std::ostringstream msg;
        msg << key << " needs " << count << " numbers, got " << out.size();
        throw ConfigError(msg.str());
    }
    return out;
}

// ---------------------------------------------------------------------------
// Output helpers
// ---------------------------------------------------------------------------

std::string format_real(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string sha256_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read " + path.string());
    EVP_MD_CTX* ctx = EVP_MD_CTX_new();
    EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr);
    std::vector<char> buf(1 << 16);
    while (in) {
        in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
        EVP_DigestUpdate(ctx, buf.data(), static_cast<std::size_t>(in.gcount()));
    }
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    EVP_DigestFinal_ex(ctx, md, &len);
    EVP_MD_CTX_free(ctx);
    std::ostringstream hex;
    for (unsigned int i = 0; i < len; ++i) hex << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(md[i]);
    return hex.str();
}

namespace {

std::ofstream open_out(const fs::path& path) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot write " + path.string());
    return f;
}

std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> out;
    std::string cell;
    std::istringstream in(line);
    while (std::getline(in, cell, ',')) out.push_back(cell);
    return out;
}

}  // namespace

std::vector<fs::path> write_field(const fs::path& stem, const ScalarField& u) {
    const TriMesh& m = u.mesh();
    const fs::path nodes = stem.string() + ".nodes.csv", tris = stem.string() + ".triangles.csv";
    auto f = open_out(nodes);
    f << "node,x,y,u\n";
    for (std::size_t k = 0; k < m.node_count(); ++k)
        f << k << ',' << format_real(m.nodes[k].x()) << ',' << format_real(m.nodes[k].y()) << ','
          << format_real(u.values()[static_cast<Eigen::Index>(k)]) << '\n';
    auto g = open_out(tris);
    g << "triangle,a,b,c\n";
    for (std::size_t t = 0; t < m.triangle_count(); ++t)
        g << t << ',' << m.triangles[t][0] << ',' << m.triangles[t][1] << ',' << m.triangles[t][2] << '\n';
    return {nodes, tris};
}

ScalarField read_field(const fs::path& stem) {
    std::ifstream nf(stem.string() + ".nodes.csv"), tf(stem.string() + ".triangles.csv");
    if (!nf || !tf) throw ConfigError("cannot read field " + stem.string() + " (.nodes.csv / .triangles.csv)");
    std::vector<Vec2> nodes;
    std::vector<double> values;
    std::vector<std::array<int, 3>> tris;
    std::string line;
    std::getline(nf, line);
    try {
        while (std::getline(nf, line)) {
            if (line.empty()) continue;
            const auto c = split_csv(line);
            if (c.size() != 4) throw ConfigError("malformed node row '" + line + "'");
            nodes.emplace_back(std::stod(c[1]), std::stod(c[2]));
            values.push_back(std::stod(c[3]));
        }
        std::getline(tf, line);
        while (std::getline(tf, line)) {
            if (line.empty()) continue;
            const auto c = split_csv(line);
            if (c.size() != 4) throw ConfigError("malformed triangle row '" + line + "'");
            tris.push_back({std::stoi(c[1]), std::stoi(c[2]), std::stoi(c[3])});
        }
    } catch (const std::invalid_argument&) {
        throw ConfigError("non-numeric entry in field " + stem.string());
    }
    auto mesh = std::make_shared<const TriMesh>(mesh_from_triangles(std::move(nodes), std::move(tris)));
    return ScalarField(mesh, Eigen::Map<const Eigen::VectorXd>(values.data(), static_cast<Eigen::Index>(values.size())));
}

Comparison compare(const ScalarField& a, const ScalarField& b) {
    const TriMesh& ma = a.mesh();
    const TriMesh& mb = b.mesh();
    Comparison out;
    out.other.resize(ma.node_count());
    bool same = ma.node_count() == mb.node_count();
    for (std::size_t k = 0; same && k < ma.node_count(); ++k) same = ma.nodes[k] == mb.nodes[k];
    for (std::size_t k = 0; k < ma.node_count(); ++k) {
        if (same) {
            out.other[k] = b.values()[static_cast<Eigen::Index>(k)];
            continue;
        }
        try {
            out.other[k] = b.value_at(ma.nodes[k]);
        } catch (const OutsideDomainError&) {
            std::ostringstream msg;
            msg << "node (" << ma.nodes[k].x() << ", " << ma.nodes[k].y() << ") of the first field is outside the second";
            throw MeshMismatchError(msg.str());
        }
    }
    double sum = 0.0;
    for (std::size_t t = 0; t < ma.triangle_count(); ++t) {
        double s = 0.0;
        for (int k : ma.triangles[t]) {
            const double d = a.values()[k] - out.other[static_cast<std::size_t>(k)];
            s += d * d;
        }
        sum += ma.area(static_cast<int>(t)) * s / 3.0;
    }
    out.l2 = std::sqrt(sum / ma.total_area());
    for (std::size_t k = 0; k < ma.node_count(); ++k)
        out.linf = std::max(out.linf, std::abs(a.values()[static_cast<Eigen::Index>(k)] - out.other[k]));
    return out;
}

void write_pgm(const fs::path& path, const ScalarField& u, int width) {
    if (width < 2) throw ConfigError("raster width must be at least 2");
    const TriMesh& m = u.mesh();
    Vec2 lo = m.nodes[0], hi = m.nodes[0];
    for (const auto& x : m.nodes) {
        lo = lo.cwiseMin(x);
        hi = hi.cwiseMax(x);
    }
    const int height = std::max(2, static_cast<int>(std::lround(width * (hi.y() - lo.y()) / (hi.x() - lo.x()))));
    const double umin = u.values().minCoeff(), umax = u.values().maxCoeff();
    const double span = umax > umin ? umax - umin : 1.0;
    auto f = open_out(path);
    f << "P5\n" << width << ' ' << height << "\n65535\n";
    for (int r = 0; r < height; ++r)
        for (int c = 0; c < width; ++c) {
            const Vec2 x(lo.x() + (c + 0.5) * (hi.x() - lo.x()) / width, hi.y() - (r + 0.5) * (hi.y() - lo.y()) / height);
            unsigned v = 0;
            if (const auto loc = m.locate(x)) {
                double val = 0.0;
                for (int k = 0; k < 3; ++k) val += loc->bary[k] * u.values()[m.triangles[loc->triangle][k]];
                v = 1 + static_cast<unsigned>(std::lround(std::clamp((val - umin) / span, 0.0, 1.0) * 65534.0));
            }
            f.put(static_cast<char>(v >> 8));
            f.put(static_cast<char>(v & 0xff));
        }
}

// ---------------------------------------------------------------------------
// Pipelines
// ---------------------------------------------------------------------------

namespace {

std::vector<Vec2> pairs(const std::vector<double>& v, const std::string& key) {
    if (v.size() % 2) throw ConfigError(key + " needs an even number of coordinates");
    std::vector<Vec2> out;
    for (std::size_t k = 0; k + 1 < v.size(); k += 2) out.emplace_back(v[k], v[k + 1]);
    return out;
}

std::vector<std::vector<double>> groups(const std::string& text, const std::string& key, std::size_t size) {
    std::vector<std::vector<double>> out;
    std::istringstream in(text);
    std::string part;
    while (std::getline(in, part, ';')) {
        if (part.find_first_not_of(" \t") == std::string::npos) continue;
        RunConfig tmp;
        tmp.set(key, part);
        out.push_back(tmp.reals(key, size));
    }
    return out;
}

struct Hexagon {
    int a = 0, b = 0, c = 0;
    double scale = 1.0;
};

class Pipeline {
public:
    Pipeline(const RunConfig& config, fs::path out, std::ostream& diag)
        : cfg_(config), out_(std::move(out)), diag_(diag) {}

    int execute(const std::string& command);

private:
    // setup
    GradientPolygon polygon() const;
    std::shared_ptr<const TensionModel> tension() const;
    std::vector<Vec2> outline();
    std::shared_ptr<const TriMesh> mesh();
    BoundaryData boundary(const TriMesh& mesh);
    std::shared_ptr<const LatticeRegion> region();

    // commands
    void solve_command();
    SolveReport run_solve();
    void obstacles_command();
    void sample_command();
    void compare_command();
    void diagnose_command();
    void tension_eval_command();
    void enumerate_command();

    // output
    fs::path file(const std::string& name) {
        const fs::path p = out_ / name;
        emitted_.push_back(p);
        return p;
    }
    void field(const std::string& stem, const ScalarField& u) {
        for (const auto& p : write_field(out_ / stem, u)) emitted_.push_back(p);
        if (cfg_.flag("run.pgm")) write_pgm(file(stem + ".pgm"), u, static_cast<int>(cfg_.integer("run.pgm_width")));
    }
    void metric(const std::string& key, const std::string& value) { summary_.emplace_back(key, value); }
    void metric(const std::string& key, double value) { summary_.emplace_back(key, format_real(value)); }
    void metric(const std::string& key, long value) { summary_.emplace_back(key, std::to_string(value)); }
    void finish(const std::string& command, int status);

    const RunConfig& cfg_;
    fs::path out_;
    std::ostream& diag_;
    std::vector<fs::path> emitted_;
    std::vector<std::pair<std::string, std::string>> summary_;
    std::optional<Hexagon> hexagon_;
};

GradientPolygon Pipeline::polygon() const {
    std::string preset = cfg_.text("polygon.preset");
    if (preset == "auto") preset = cfg_.text("tension.model") == "lozenge" ? "lozenge" : "square";
    if (preset == "square") return GradientPolygon::square(cfg_.real("polygon.half_width"));
    if (preset == "lozenge") return GradientPolygon::lozenge_triangle();
    if (preset == "vertices") {
        const auto v = pairs(cfg_.reals("polygon.vertices"), "polygon.vertices");
        if (v.size() < 3) throw ConfigError("polygon.vertices needs at least three vertices");
        if (cfg_.text("polygon.interior").empty()) return GradientPolygon(v);
        const auto z = cfg_.reals("polygon.interior", 2);
        return GradientPolygon(v, Vec2(z[0], z[1]));
    }
    throw ConfigError("polygon.preset must be auto, square, lozenge or vertices");
}

std::shared_ptr<const TensionModel> Pipeline::tension() const {
    const std::string& name = cfg_.text("tension.model");
    std::vector<SingularTerm> terms;
    for (const auto& g : groups(cfg_.text("tension.singular"), "tension.singular", 4))
        terms.push_back({Vec2(g[0], g[1]), g[2], g[3]});
    if (name != "quadratic" && name != "lozenge" && name != "custom-singular")
        throw ConfigError("tension.model = '" + name + "': expected quadratic, lozenge or custom-singular");
    return make_tension(name, polygon(), cfg_.real("tension.weight"), terms);
}

std::vector<Vec2> Pipeline::outline() {
    const std::string& shape = cfg_.text("domain.shape");
    if (shape == "rectangle") {
        const auto lo = cfg_.reals("domain.lo", 2), hi = cfg_.reals("domain.hi", 2);
        if (!(hi[0] > lo[0] && hi[1] > lo[1])) throw ConfigError("domain.hi must exceed domain.lo");
        return {{lo[0], lo[1]}, {hi[0], lo[1]}, {hi[0], hi[1]}, {lo[0], hi[1]}};
    }
    if (shape == "hexagon") {
        const auto s = cfg_.reals("domain.sides", 3);
        Hexagon h;
        h.a = static_cast<int>(s[0]);
        h.b = static_cast<int>(s[1]);
        h.c = static_cast<int>(s[2]);
        if (h.a < 1 || h.b < 1 || h.c < 1 || h.a != s[0] || h.b != s[1] || h.c != s[2])
            throw ConfigError("domain.sides must be positive integers");
        h.scale = cfg_.real("domain.scale");
        if (h.scale == 0) h.scale = std::max({h.a, h.b, h.c});
        if (!(h.scale > 0)) throw ConfigError("domain.scale must be positive");
        hexagon_ = h;
        std::vector<Vec2> out;
        for (const auto& [i, j] : hexagon_corners(h.a, h.b, h.c)) out.push_back(lattice_point(i, j) / h.scale);
        return out;
    }
    if (shape == "polygon") {
        auto v = pairs(cfg_.reals("domain.vertices"), "domain.vertices");
        if (v.size() < 3) throw ConfigError("domain.vertices needs at least three vertices");
        if (!is_simple_loop(v)) throw ConfigError("domain.vertices is not a simple polygon");
        if (signed_area(v) < 0) std::reverse(v.begin(), v.end());
        return v;
    }
    throw ConfigError("domain.shape must be rectangle, hexagon or polygon");
}

std::shared_ptr<const TriMesh> Pipeline::mesh() {
    const auto loop = outline();
    std::string kind = cfg_.text("mesh.kind");
    const std::string& shape = cfg_.text("domain.shape");
    if (kind == "auto") kind = shape == "polygon" ? "delaunay" : shape;
    if (kind == "rectangle") {
        if (shape != "rectangle") throw ConfigError("mesh.kind = rectangle needs domain.shape = rectangle");
        const long nx = cfg_.integer("mesh.nx"), ny = cfg_.integer("mesh.ny") == 0 ? nx : cfg_.integer("mesh.ny");
        if (nx < 1 || ny < 1 || nx > 4096 || ny > 4096) throw ConfigError("mesh.nx and mesh.ny must be in [1, 4096]");
        return std::make_shared<const TriMesh>(rectangle_mesh(loop[0], loop[2], static_cast<int>(nx), static_cast<int>(ny)));
    }
    if (kind == "hexagon") {
        if (!hexagon_) throw ConfigError("mesh.kind = hexagon needs domain.shape = hexagon");
        const long r = cfg_.integer("mesh.refine");
        if (r < 1 || r > 64) throw ConfigError("mesh.refine must be in [1, 64]");
        return std::make_shared<const TriMesh>(hexagon_mesh(hexagon_->a, hexagon_->b, hexagon_->c, hexagon_->scale, static_cast<int>(r)));
    }
    if (kind == "delaunay") {
        const double h = cfg_.real("mesh.h");
        if (!(h > 0)) throw ConfigError("mesh.h must be positive");
        return std::make_shared<const TriMesh>(polygon_mesh(loop, h));
    }
    throw ConfigError("mesh.kind must be auto, rectangle, hexagon or delaunay");
}

// Domain corners with the mesh boundary nodes inserted along each side, so
// that nonlinear data is sampled exactly where the mesh carries it.
std::vector<Vec2> boundary_loop(const std::vector<Vec2>& corners, const TriMesh& mesh) {
    std::vector<Vec2> loop;
    for (std::size_t i = 0; i < corners.size(); ++i) {
        const Vec2 a = corners[i], b = corners[(i + 1) % corners.size()];
        const double len2 = (b - a).squaredNorm();
        std::vector<std::pair<double, Vec2>> on_side;
        for (int k : mesh.boundary_nodes()) {
            const Vec2& x = mesh.nodes[static_cast<std::size_t>(k)];
            const double t = (x - a).dot(b - a) / len2;
            if (t <= 1e-12 || t >= 1 - 1e-12) continue;
            if (std::abs(cross(b - a, x - a)) <= 1e-10 * len2) on_side.emplace_back(t, x);
        }
        std::sort(on_side.begin(), on_side.end(), [](const auto& l, const auto& r) { return l.first < r.first; });
        loop.push_back(a);
        for (const auto& [t, x] : on_side) loop.push_back(x);
    }
    loop.push_back(loop.front());
    return loop;
}

BoundaryData Pipeline::boundary(const TriMesh& mesh) {
    auto poly = outline();
    poly.push_back(poly.front());
    const std::string& kind = cfg_.text("boundary.kind");
    const double density = cfg_.real("boundary.density");
    if (density < 0) throw ConfigError("boundary.density must be nonnegative");
    if (kind == "linear" || kind == "zero") {
        const auto p = kind == "zero" ? std::vector<double>{0, 0} : cfg_.reals("boundary.slope", 2);
        auto d = BoundaryData::linear(poly, {p[0], p[1]}, kind == "zero" ? 0.0 : cfg_.real("boundary.offset"));
        d.sample_density = density;
        return d;
    }
    if (kind == "polynomial") {
        const auto c = cfg_.reals("boundary.coefficients", 6);
        poly.pop_back();
        return BoundaryData::from_function(boundary_loop(poly, mesh), [&](const Vec2& y) {
            return c[0] + c[1] * y.x() + c[2] * y.y() + c[3] * y.x() * y.x() + c[4] * y.x() * y.y() + c[5] * y.y() * y.y();
        }, density);
    }
    if (kind == "values") {
        auto v = cfg_.reals("boundary.values", poly.size() - 1);
        v.push_back(v.front());
        return BoundaryData{poly, v, density};
    }
    if (kind == "box") {
        if (!hexagon_) throw ConfigError("boundary.kind = box needs domain.shape = hexagon");
        std::vector<double> v;
        for (const auto& [i, j] : hexagon_corners(hexagon_->a, hexagon_->b, hexagon_->c))
            v.push_back((3 * std::max({-i, 0, j}) + i - j) / (3.0 * hexagon_->scale));
        v.push_back(v.front());
        return BoundaryData{poly, v, density};
    }
    throw ConfigError("boundary.kind must be linear, zero, polynomial, values or box");
}

std::shared_ptr<const LatticeRegion> Pipeline::region() {
    if (cfg_.text("domain.shape") != "hexagon") throw ConfigError("lattice commands need domain.shape = hexagon");
    outline();
    return std::make_shared<const LatticeRegion>(
        LatticeRegion::hexagon(hexagon_->a, hexagon_->b, hexagon_->c, hexagon_->scale));
}

SolveReport Pipeline::run_solve() {
    const auto msh = mesh();
    Problem problem{msh, tension(), boundary(*msh), {}};
    PenaltySchedule sched;
    sched.first = static_cast<int>(cfg_.integer("schedule.first"));
    sched.last = static_cast<int>(cfg_.integer("schedule.last"));
    sched.convexity_floor_base = cfg_.real("schedule.convexity_floor_base");
    sched.radius_factor = cfg_.real("schedule.radius_factor");
    if (sched.first < 0 || sched.last < sched.first || sched.last > 30)
        throw ConfigError("schedule needs 0 <= first <= last <= 30");
    if (!(sched.convexity_floor_base > 1)) throw ConfigError("schedule.convexity_floor_base must exceed 1");
    if (!(sched.radius_factor > 0 && sched.radius_factor <= 1)) throw ConfigError("schedule.radius_factor must be in (0, 1]");
    Tolerances tol;
    tol.kkt = cfg_.real("tolerances.kkt");
    tol.constraint = cfg_.real("tolerances.constraint");
    tol.energy = cfg_.real("tolerances.energy");
    tol.boundary_layer = cfg_.real("tolerances.boundary_layer");
    tol.max_newton = static_cast<int>(cfg_.integer("tolerances.max_newton"));
    tol.early_stop = cfg_.flag("tolerances.early_stop");
    if (tol.kkt < 0 || tol.constraint < 0 || tol.energy < 0 || tol.boundary_layer < 0 || tol.max_newton < 1)
        throw ConfigError("tolerances must be nonnegative and max_newton positive");

    const std::string& init = cfg_.text("run.initial");
    if (init == "zero" || init == "upper" || init == "lower") {
        Eigen::VectorXd v = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(problem.mesh->node_count()));
        if (init != "zero") {
            const Obstacles obs(problem.data, problem.model->polygon());
            for (std::size_t k = 0; k < problem.mesh->node_count(); ++k)
                v[static_cast<Eigen::Index>(k)] = init == "upper" ? obs.upper(problem.mesh->nodes[k]) : obs.lower(problem.mesh->nodes[k]);
        }
        problem.initial = v;
    } else if (init != "midpoint") {
        throw ConfigError("run.initial must be midpoint, zero, upper or lower");
    }
    auto rep = solve(problem, sched, tol);
    diag_ << "solve: " << rep.iterations << " Newton steps in " << rep.wall_time << " s\n";
    for (const auto& w : rep.warnings) diag_ << "warning: " << w << '\n';
    return rep;
}

void Pipeline::solve_command() {
    const auto rep = run_solve();
    field("field", rep.field);
    {
        auto f = open_out(file("stages.csv"));
        f << "m,iterations,max_gauge_excess,energy\n";
        for (std::size_t s = 0; s < rep.stages.size(); ++s)
            f << rep.stages[s] << ',' << rep.stage_iterations[s] << ',' << format_real(rep.max_gauge_excess[s]) << ','
              << format_real(rep.energy_history[s].empty() ? 0.0 : rep.energy_history[s].back()) << '\n';
        auto g = open_out(file("history.csv"));
        g << "m,iterate,energy\n";
        for (std::size_t s = 0; s < rep.stages.size(); ++s)
            for (std::size_t k = 0; k < rep.energy_history[s].size(); ++k)
                g << rep.stages[s] << ',' << k << ',' << format_real(rep.energy_history[s][k]) << '\n';
    }
    const TriMesh& m = rep.field.mesh();
    metric("nodes", static_cast<long>(m.node_count()));
    metric("triangles", static_cast<long>(m.triangle_count()));
    metric("mesh_size", m.mesh_size());
    metric("tension", tension()->name());
    metric("stages", static_cast<long>(rep.stages.size()));
    metric("final_m", static_cast<long>(rep.stages.empty() ? 0 : rep.stages.back()));
    metric("iterations", static_cast<long>(rep.iterations));
    metric("energy", rep.energy_history.empty() || rep.energy_history.back().empty() ? 0.0 : rep.energy_history.back().back());
    metric("max_gauge_excess", rep.max_gauge_excess.empty() ? 0.0 : rep.max_gauge_excess.back());
    metric("el_residual_norm", rep.el_residual_norm);
    metric("kkt_norm", rep.kkt_norm);
    metric("kkt_tolerance", rep.kkt_tolerance);
    metric("contact_nodes", static_cast<long>(rep.contact_nodes));
    metric("rigid_nodes", static_cast<long>(rep.rigid_nodes));
    metric("warnings", static_cast<long>(rep.warnings.size()));
    if (tension()->name() == "lozenge") metric("lozenge_convention", lozenge_convention());
}

void Pipeline::obstacles_command() {
    const auto msh = mesh();
    const auto data = boundary(*msh);
    const auto N = polygon();
    const auto adm = check_admissible(data, N);
    metric("admissible", adm.valid ? "true" : "false");
    metric("slack", adm.slack);
    metric("worst_y1", format_real(adm.y1.x()) + " " + format_real(adm.y1.y()));
    metric("worst_y2", format_real(adm.y2.x()) + " " + format_real(adm.y2.y()));
    if (!adm.valid) {
        std::ostringstream msg;
        msg << "boundary data is not admissible: slack " << adm.slack;
        throw InadmissibleError(msg.str());
    }
    const Obstacles obs(data, N);
    auto f = open_out(file("obstacles.csv"));
    f << "node,x,y,lower,upper\n";
    double gap = 0.0;
    for (std::size_t k = 0; k < msh->node_count(); ++k) {
        const auto [lo, up] = obs.pair(msh->nodes[k]);
        gap = std::max(gap, up - lo);
        f << k << ',' << format_real(msh->nodes[k].x()) << ',' << format_real(msh->nodes[k].y()) << ',' << format_real(lo)
          << ',' << format_real(up) << '\n';
    }
    metric("nodes", static_cast<long>(msh->node_count()));
    metric("max_gap", gap);
    metric("convex_domain", obs.convex_domain() ? "true" : "false");
}

void Pipeline::sample_command() {
    const auto r = region();
    SampleOptions o;
    o.burn_in = cfg_.integer("sampler.burn_in");
    o.samples = cfg_.integer("sampler.samples");
    o.thinning = cfg_.integer("sampler.thinning");
    o.max_burn_in = cfg_.integer("sampler.max_burn_in");
    o.seed = static_cast<std::uint64_t>(std::stoull(cfg_.text("run.seed")));
    if (o.samples < 1 || o.thinning < 0 || o.burn_in < -1 || o.max_burn_in < 0)
        throw ConfigError("sampler parameters out of range");
    const auto mh = sample_mean_height(r, o);
    {
        auto f = open_out(file("sites.csv"));
        f << "i,j,mean_height\n";
        for (std::size_t k = 0; k < r->size(); ++k)
            f << r->site(k)[0] << ',' << r->site(k)[1] << ',' << format_real(mh.mean[k]) << '\n';
    }
    field("graph", rescale_to_graph(mh.mean, *r, nullptr));
    metric("sites", static_cast<long>(r->size()));
    metric("interior_sites", static_cast<long>(r->interior().size()));
    metric("seed", cfg_.text("run.seed"));
    metric("burn_in", mh.burn_in);
    metric("coalescence_sweep", mh.coalescence_sweep);
    metric("certified", mh.certified ? "true" : "false");
    metric("samples", mh.samples);
    metric("thinning", mh.thinning);
    metric("lozenge_convention", lozenge_convention());
    if (!mh.certified) diag_ << "warning: minimal and maximal chains did not coalesce\n";
}

void Pipeline::compare_command() {
    if (cfg_.text("compare.a").empty() || cfg_.text("compare.b").empty())
        throw ConfigError("compare needs compare.a and compare.b");
    const auto a = read_field(cfg_.text("compare.a"));
    const auto b = read_field(cfg_.text("compare.b"));
    const auto c = compare(a, b);
    auto f = open_out(file("compare.csv"));
    f << "node,x,y,a,b,difference\n";
    for (std::size_t k = 0; k < a.mesh().node_count(); ++k) {
        const double av = a.values()[static_cast<Eigen::Index>(k)];
        f << k << ',' << format_real(a.mesh().nodes[k].x()) << ',' << format_real(a.mesh().nodes[k].y()) << ','
          << format_real(av) << ',' << format_real(c.other[k]) << ',' << format_real(av - c.other[k]) << '\n';
    }
    metric("l2", c.l2);
    metric("linf", c.linf);
    metric("nodes", static_cast<long>(a.mesh().node_count()));
}

void Pipeline::diagnose_command() {
    std::optional<ScalarField> u;
    if (cfg_.text("diagnose.field").empty()) {
        auto rep = run_solve();
        u = rep.field;
        field("field", *u);
    } else {
        u = read_field(cfg_.text("diagnose.field"));
    }
    const auto N = polygon();
    const auto radii = cfg_.reals("diagnose.radii");
    const auto mc = cfg_.integer("diagnose.max_centres");
    if (mc < 1) throw ConfigError("diagnose.max_centres must be positive");
    auto curve = [&](const std::string& name, const Curve& c) {
        auto f = open_out(file(name));
        f << "delta,omega\n";
        for (const auto& [d, w] : c) f << format_real(d) << ',' << format_real(w) << '\n';
    };
    curve("modulus.csv", gradient_modulus(*u, radii, static_cast<std::size_t>(mc)));
    curve("h_continuity.csv", h_continuity(*u, N, radii, static_cast<std::size_t>(mc)));

    const auto facets = detect_facets(*u, N, cfg_.real("diagnose.facet_tol"), cfg_.real("diagnose.geometric_tol"));
    {
        auto f = open_out(file("facets.txt"));
        for (std::size_t k = 0; k < facets.size(); ++k) {
            const auto& x = facets[k];
            f << "[facet " << k << "]\n"
              << "vertex = " << x.vertex << "\nslope = " << format_real(x.slope.x()) << ' ' << format_real(x.slope.y())
              << "\nomega = " << format_real(x.omega.x()) << ' ' << format_real(x.omega.y())
              << "\ntriangles = " << x.triangles.size() << "\nupper_points = " << x.upper_chain.size()
              << "\nlower_points = " << x.lower_chain.size() << "\nupper_violation = " << format_real(x.upper_violation)
              << "\nlower_violation = " << format_real(x.lower_violation)
              << "\nupper_convex = " << (x.upper_convex ? "true" : "false")
              << "\nlower_concave = " << (x.lower_concave ? "true" : "false") << "\n\n";
        }
    }
    const auto jumps = detect_jump_segments(*u, N, cfg_.real("diagnose.jump_tol"), cfg_.real("diagnose.angle_tolerance"));
    long compliant = 0;
    {
        auto f = open_out(file("jumps.txt"));
        f << "jump_edges = " << jumps.jump_edges.size() << "\nresidual_tolerance = " << format_real(jumps.residual_tolerance)
          << "\n\n";
        for (std::size_t k = 0; k < jumps.segments.size(); ++k) {
            const auto& s = jumps.segments[k];
            compliant += s.compliant;
            f << "[segment " << k << "]\n"
              << "point = " << format_real(s.point.x()) << ' ' << format_real(s.point.y())
              << "\ndirection = " << format_real(s.direction.x()) << ' ' << format_real(s.direction.y())
              << "\nextent = " << format_real(s.s_min) << ' ' << format_real(s.s_max) << "\nedges = " << s.edges
              << "\nside = " << s.side << "\nangle_deviation = " << format_real(s.angle_deviation)
              << "\nreach_start = " << (s.reach_start ? "true" : "false")
              << "\nreach_end = " << (s.reach_end ? "true" : "false")
              << "\naffine_residual = " << format_real(s.affine_residual)
              << "\ncompliant = " << (s.compliant ? "true" : "false") << "\n\n";
        }
    }
    const TriMesh& m = u->mesh();
    Disk window;
    if (cfg_.text("diagnose.window").empty()) {
        Vec2 c = Vec2::Zero();
        for (const auto& x : m.outline) c += x;
        c /= static_cast<double>(m.outline.size());
        window = {c, 0.5 * m.boundary_distance(c)};
    } else {
        const auto w = cfg_.reals("diagnose.window", 3);
        window = {{w[0], w[1]}, w[2]};
    }
    const auto e = cfg_.reals("diagnose.direction", 2);
    const CaccioppoliParams p{{e[0], e[1]}, cfg_.real("diagnose.c0"), cfg_.real("diagnose.c1"), window};
    metric("facets", static_cast<long>(facets.size()));
    metric("facets_passing",
           static_cast<long>(std::count_if(facets.begin(), facets.end(), [](const FacetReport& f) { return f.upper_convex && f.lower_concave; })));
    metric("jump_segments", static_cast<long>(jumps.segments.size()));
    metric("compliant_segments", compliant);
    metric("window", format_real(window.center.x()) + " " + format_real(window.center.y()) + " " + format_real(window.radius));
    metric("caccioppoli_energy", caccioppoli_energy(*u, p));
    metric("directional_dirichlet", directional_dirichlet(*u, p.direction, window));
    metric("hessian_energy", hessian_energy(*u, [](const Vec2&) { return true; }, window));
}

void Pipeline::tension_eval_command() {
    const auto model = tension();
    const auto& N = model->polygon();
    std::vector<Vec2> pts;
    for (const auto& g : groups(cfg_.text("tension-eval.points"), "tension-eval.points", 2)) pts.emplace_back(g[0], g[1]);
    const long n = cfg_.integer("tension-eval.grid");
    if (n < 0 || n > 2000) throw ConfigError("tension-eval.grid must be in [0, 2000]");
    if (n > 0) {
        Vec2 lo = N.vertex(0), hi = N.vertex(0);
        for (const auto& v : N.vertices()) {
            lo = lo.cwiseMin(v);
            hi = hi.cwiseMax(v);
        }
        for (long r = 0; r < n; ++r)
            for (long c = 0; c < n; ++c) {
                const Vec2 p(lo.x() + (c + 0.5) * (hi.x() - lo.x()) / n, lo.y() + (r + 0.5) * (hi.y() - lo.y()) / n);
                if (N.contains(p, 0.0)) pts.push_back(p);
            }
    }
    if (pts.empty()) throw ConfigError("tension-eval needs tension-eval.points or tension-eval.grid");
    const int order = static_cast<int>(cfg_.integer("tension-eval.order"));
    if (order < 0 || order > 2) throw ConfigError("tension-eval.order must be 0, 1 or 2");
    auto f = open_out(file("tension.csv"));
    f << "px,py,value,gx,gy,hxx,hxy,hyy\n";
    long skipped = 0;
    for (const auto& p : pts) {
        TensionSample s;
        int used = order;
        while (true) {
            try {
                s = model->eval(p, used);
                break;
            } catch (const SingularPointError&) {
                if (used == 0) throw;
            } catch (const OutsideDomainError&) {
                if (used == 0) throw;
            }
            --used;
        }
        if (used < 2) s.hessian.setConstant(std::nan(""));
        if (used < 1) s.gradient.setConstant(std::nan(""));
        skipped += used < order;
        f << format_real(p.x()) << ',' << format_real(p.y()) << ',' << format_real(s.value) << ','
          << format_real(s.gradient.x()) << ',' << format_real(s.gradient.y()) << ',' << format_real(s.hessian(0, 0))
          << ',' << format_real(s.hessian(0, 1)) << ',' << format_real(s.hessian(1, 1)) << '\n';
    }
    metric("tension", model->name());
    metric("points", static_cast<long>(pts.size()));
    metric("reduced_order_points", skipped);
}

void Pipeline::enumerate_command() {
    const auto r = region();
    const auto count = enumerate_tilings(*r);
    metric("sides", std::to_string(hexagon_->a) + " " + std::to_string(hexagon_->b) + " " + std::to_string(hexagon_->c));
    metric("interior_sites", static_cast<long>(r->interior().size()));
    metric("tilings", std::to_string(count));
    double mac = 1.0;
    for (int i = 1; i <= hexagon_->a; ++i)
        for (int j = 1; j <= hexagon_->b; ++j)
            for (int k = 1; k <= hexagon_->c; ++k) mac *= static_cast<double>(i + j + k - 1) / (i + j + k - 2);
    metric("macmahon", std::to_string(std::llround(mac)));
    metric("agrees", static_cast<double>(count) == std::round(mac) ? "true" : "false");
}

void Pipeline::finish(const std::string& command, int status) {
    std::error_code ec;
    fs::create_directories(out_, ec);
    {
        std::ofstream f(file("summary.txt"), std::ios::binary);
        f << "command = " << command << "\nstatus = " << status << '\n';
        for (const auto& [k, v] : summary_) f << k << " = " << v << '\n';
    }
    std::vector<fs::path> files = emitted_;
    std::sort(files.begin(), files.end());
    files.erase(std::unique(files.begin(), files.end()), files.end());
    std::ofstream m(out_ / "manifest.txt", std::ios::binary);
    for (const auto& p : files)
        if (fs::exists(p)) m << sha256_file(p) << "  " << fs::file_size(p) << "  " << p.filename().string() << '\n';
}

int Pipeline::execute(const std::string& command) {
    int status = kExitOk;
    try {
        if (std::find(kCommands.begin(), kCommands.end(), command) == kCommands.end())
            throw ConfigError("unknown command '" + command + "'");
        fs::create_directories(out_);
        if (command == "solve") solve_command();
        else if (command == "obstacles") obstacles_command();
        else if (command == "sample") sample_command();
        else if (command == "compare") compare_command();
        else if (command == "diagnose") diagnose_command();
        else if (command == "tension-eval") tension_eval_command();
        else enumerate_command();
    } catch (const InadmissibleError& e) {
        diag_ << "inadmissible: " << e.what() << '\n';
        status = kExitInadmissible;
    } catch (const InadmissibleBoundaryError& e) {
        diag_ << "inadmissible: " << e.what() << '\n';
        status = kExitInadmissible;
    } catch (const NonConvergenceError& e) {
        diag_ << "no convergence: " << e.what() << '\n';
        status = kExitNonConvergence;
    } catch (const Error& e) {
        diag_ << "error: " << e.what() << '\n';
        status = kExitConfig;
    } catch (const std::exception& e) {
        diag_ << "failure: " << e.what() << '\n';
        status = kExitOther;
    }
    try {
        finish(command, status);
    } catch (const std::exception& e) {
        diag_ << "failure: " << e.what() << '\n';
        return kExitOther;
    }
    return status;
}

}  // namespace

int run(const std::string& command, const RunConfig& config, const fs::path& out, std::ostream& diag) {
    return Pipeline(config, out, diag).execute(command);
}

}  // namespace limitshape
