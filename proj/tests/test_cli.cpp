#include <doctest.h>

#include "limitshape/cli.hpp"

#include <unistd.h>

#include <cmath>
#include <fstream>
#include <sstream>

using namespace limitshape;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("limitshape_cli_" + std::to_string(::getpid())) / name;
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

std::map<std::string, std::string> summary(const fs::path& dir) {
    std::map<std::string, std::string> out;
    std::istringstream in(slurp(dir / "summary.txt"));
    std::string line;
    while (std::getline(in, line)) {
        const auto eq = line.find(" = ");
        if (eq != std::string::npos) out[line.substr(0, eq)] = line.substr(eq + 3);
    }
    return out;
}

RunConfig linear_config(int n) {
    return RunConfig::parse("[domain]\nshape = rectangle\n[mesh]\nnx = " + std::to_string(n) +
                            "\n[boundary]\nkind = linear\nslope = 0.3 -0.2\n");
}

}  // namespace

// ---------------------------------------------------------------------------
// Config
// ---------------------------------------------------------------------------

TEST_CASE("config defaults and parsing") {
    const RunConfig d;
    for (const auto& [key, entry] : config_schema()) CHECK(d.text(key) == entry.first);

    const auto c = RunConfig::parse("# comment\n; other comment\n[mesh]\nnx = 12\n\n[boundary]\nslope = 0.5 -1e-3\n");
    CHECK(c.integer("mesh.nx") == 12);
    CHECK(c.is_set("mesh.nx"));
    CHECK_FALSE(c.is_set("mesh.ny"));
    const auto s = c.reals("boundary.slope", 2);
    CHECK(s[0] == 0.5);
    CHECK(s[1] == -1e-3);
    CHECK(c.flag("tolerances.early_stop"));
}

TEST_CASE("config rejects unknown keys and bad values") {
    CHECK_THROWS_AS(RunConfig::parse("[mesh]\nnx = 3\nbogus = 1\n"), ConfigError);
    CHECK_THROWS_AS(RunConfig::parse("[nowhere]\nnx = 3\n"), ConfigError);
    CHECK_THROWS_AS(RunConfig::parse("nx = 3\n"), ConfigError);
    CHECK_THROWS_AS(RunConfig::parse("[mesh\nnx = 3\n"), ConfigError);

    RunConfig c;
    CHECK_THROWS_AS(c.apply_override("mesh.nx"), ConfigError);
    c.apply_override(" mesh.nx = 7 ");
    CHECK(c.integer("mesh.nx") == 7);
    c.set("mesh.nx", "7.5");
    CHECK_THROWS_AS((void)c.integer("mesh.nx"), ConfigError);
    c.set("boundary.slope", "1 nan");
    CHECK_THROWS_AS((void)c.reals("boundary.slope", 2), ConfigError);
    c.set("boundary.slope", "1 2 3");
    CHECK_THROWS_AS((void)c.reals("boundary.slope", 2), ConfigError);
    c.set("run.pgm", "maybe");
    CHECK_THROWS_AS((void)c.flag("run.pgm"), ConfigError);
}

// ---------------------------------------------------------------------------
// Output helpers
// ---------------------------------------------------------------------------

TEST_CASE("sha256 and number formatting") {
    const auto dir = scratch("sha");
    std::ofstream(dir / "abc.txt", std::ios::binary) << "abc";
    CHECK(sha256_file(dir / "abc.txt") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    std::ofstream(dir / "empty.txt", std::ios::binary).flush();
    CHECK(sha256_file(dir / "empty.txt") == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");

    for (double v : {0.1, 1.0 / 3.0, -2.5e-300, 6.02214076e23, std::nextafter(1.0, 2.0)})
        CHECK(std::stod(format_real(v)) == v);
}

TEST_CASE("field files round trip exactly") {
    auto mesh = std::make_shared<const TriMesh>(hexagon_mesh(2, 3, 2, 3.0, 2));
    const auto u = ScalarField::interpolate(mesh, [](const Vec2& x) { return std::sin(3 * x.x()) + x.y() / 7; });
    const auto dir = scratch("field");
    write_field(dir / "u", u);
    const auto v = read_field(dir / "u");
    REQUIRE(v.mesh().node_count() == mesh->node_count());
    REQUIRE(v.mesh().triangle_count() == mesh->triangle_count());
    for (std::size_t k = 0; k < mesh->node_count(); ++k) {
        CHECK(v.mesh().nodes[k] == mesh->nodes[k]);
        CHECK(v.values()[static_cast<Eigen::Index>(k)] == u.values()[static_cast<Eigen::Index>(k)]);
    }
    CHECK(v.mesh().total_area() == doctest::Approx(mesh->total_area()).epsilon(1e-14));
    CHECK_THROWS_AS((void)read_field(dir / "missing"), ConfigError);
}

TEST_CASE("pgm raster") {
    auto mesh = std::make_shared<const TriMesh>(hexagon_mesh(1, 1, 1, 1.0, 4));
    const auto u = ScalarField::interpolate(mesh, [](const Vec2& x) { return x.x(); });
    const auto dir = scratch("pgm");
    write_pgm(dir / "u.pgm", u, 40);
    const std::string bytes = slurp(dir / "u.pgm");
    std::istringstream in(bytes);
    std::string magic;
    int w = 0, h = 0, maxval = 0;
    in >> magic >> w >> h >> maxval;
    in.get();
    CHECK(magic == "P5");
    CHECK(w == 40);
    CHECK(maxval == 65535);
    const auto header = static_cast<std::size_t>(in.tellg());
    REQUIRE(bytes.size() == header + 2u * static_cast<std::size_t>(w * h));
    // corners of the bounding box lie outside the hexagon, its centre inside
    auto pixel = [&](int r, int c) {
        const std::size_t at = header + 2u * static_cast<std::size_t>(r * w + c);
        return (static_cast<unsigned char>(bytes[at]) << 8) | static_cast<unsigned char>(bytes[at + 1]);
    };
    CHECK(pixel(0, 0) == 0);
    CHECK(pixel(h - 1, w - 1) == 0);
    CHECK(pixel(h / 2, w / 2) > 0);
    CHECK(pixel(h / 2, w / 4) < pixel(h / 2, 3 * w / 4));
}

// ---------------------------------------------------------------------------
// compare
// ---------------------------------------------------------------------------

TEST_CASE("compare of equal and shifted fields") {
    auto mesh = std::make_shared<const TriMesh>(polygon_mesh(std::vector<Vec2>{{0, 0}, {2, 0}, {2, 1}, {1, 2}, {0, 1}}, 0.2));
    const auto u = ScalarField::interpolate(mesh, [](const Vec2& x) { return x.x() * x.y(); });
    auto same = compare(u, u);
    CHECK(same.l2 == 0.0);
    CHECK(same.linf == 0.0);

    const double c = 0.37;
    auto shifted = u;
    shifted.values().array() += c;
    const auto d = compare(u, shifted);
    CHECK(d.l2 == doctest::Approx(c).epsilon(1e-12));
    CHECK(d.linf == doctest::Approx(c).epsilon(1e-12));
}

TEST_CASE("compare interpolates across meshes") {
    auto coarse = std::make_shared<const TriMesh>(rectangle_mesh({0, 0}, {1, 1}, 5, 5));
    auto fine = std::make_shared<const TriMesh>(rectangle_mesh({0, 0}, {1, 1}, 7, 3));
    auto affine = [](const Vec2& x) { return 0.4 * x.x() - 1.3 * x.y() + 0.2; };
    const auto d = compare(ScalarField::interpolate(coarse, affine), ScalarField::interpolate(fine, affine));
    CHECK(d.linf < 1e-14);

    auto small = std::make_shared<const TriMesh>(rectangle_mesh({0, 0}, {0.5, 1}, 4, 4));
    CHECK_THROWS_AS((void)compare(ScalarField::interpolate(coarse, affine), ScalarField::interpolate(small, affine)),
                    MeshMismatchError);
    // the other direction interpolates inside the larger mesh
    CHECK(compare(ScalarField::interpolate(small, affine), ScalarField::interpolate(coarse, affine)).linf < 1e-14);
}

// ---------------------------------------------------------------------------
// run
// ---------------------------------------------------------------------------

TEST_CASE("solve of the linear preset reproduces the affine data") {
    const auto dir = scratch("linear");
    std::ostringstream diag;
    REQUIRE(run("solve", linear_config(16), dir, diag) == kExitOk);
    const auto u = read_field(dir / "field");
    double worst = 0.0;
    for (std::size_t k = 0; k < u.mesh().node_count(); ++k) {
        const Vec2& x = u.mesh().nodes[k];
        worst = std::max(worst, std::abs(u.values()[static_cast<Eigen::Index>(k)] - (0.3 * x.x() - 0.2 * x.y())));
    }
    CHECK(worst <= 1e-8);
    const auto s = summary(dir);
    CHECK(s.at("status") == "0");
    CHECK(std::stod(s.at("el_residual_norm")) <= 1e-8);
    CHECK(s.count("lozenge_convention") == 0);
}

TEST_CASE("exit codes") {
    std::ostringstream diag;
    auto steep = linear_config(8);
    steep.set("boundary.slope", "2 0");
    CHECK(run("solve", steep, scratch("steep"), diag) == kExitInadmissible);
    const auto obs = scratch("steep_obs");
    CHECK(run("obstacles", steep, obs, diag) == kExitInadmissible);
    CHECK(summary(obs).at("admissible") == "false");

    auto bad = linear_config(8);
    bad.set("tension.model", "cubic");
    CHECK(run("solve", bad, scratch("bad"), diag) == kExitConfig);
    CHECK(run("launch", linear_config(8), scratch("cmd"), diag) == kExitConfig);

    auto capped = RunConfig::parse("[domain]\nshape = hexagon\nsides = 3 3 3\n[tension]\nmodel = lozenge\n"
                                   "[boundary]\nkind = box\n[tolerances]\nmax_newton = 1\n");
    CHECK(run("solve", capped, scratch("capped"), diag) == kExitNonConvergence);
    CHECK(diag.str().find("cubic") != std::string::npos);
}

TEST_CASE("enumerate agrees with the box product formula") {
    const auto dir = scratch("enum");
    std::ostringstream diag;
    for (const char* sides : {"1 1 1", "2 2 2", "2 3 1"}) {
        auto c = RunConfig::parse(std::string("[domain]\nshape = hexagon\nsides = ") + sides + "\n");
        REQUIRE(run("enumerate", c, dir, diag) == kExitOk);
        const auto s = summary(dir);
        CHECK(s.at("tilings") == s.at("macmahon"));
    }
    CHECK(summary(dir).at("tilings") == "10");
}

TEST_CASE("reruns are byte identical and the manifest matches") {
    std::ostringstream diag;
    auto hex = RunConfig::parse("[domain]\nshape = hexagon\nsides = 4 3 5\n[tension]\nmodel = lozenge\n"
                                "[boundary]\nkind = box\n[sampler]\nsamples = 5\nthinning = 2\n[run]\npgm = true\n"
                                "pgm_width = 32\n");
    for (const std::string command : {"solve", "sample", "obstacles", "diagnose"}) {
        const auto a = scratch(command + "_a"), b = scratch(command + "_b");
        REQUIRE(run(command, hex, a, diag) == kExitOk);
        REQUIRE(run(command, hex, b, diag) == kExitOk);
        std::istringstream manifest(slurp(a / "manifest.txt"));
        std::string digest, name;
        std::uintmax_t bytes = 0;
        int files = 0;
        while (manifest >> digest >> bytes >> name) {
            ++files;
            CHECK(sha256_file(a / name) == digest);
            CHECK(fs::file_size(a / name) == bytes);
            CHECK(slurp(a / name) == slurp(b / name));
        }
        CHECK(files >= 2);
        CHECK(slurp(a / "manifest.txt") == slurp(b / "manifest.txt"));
    }
    auto reseeded = hex;
    reseeded.set("run.seed", "2");
    const auto c = scratch("sample_c");
    REQUIRE(run("sample", reseeded, c, diag) == kExitOk);
    CHECK(slurp(c / "sites.csv") != slurp(fs::temp_directory_path() / ("limitshape_cli_" + std::to_string(::getpid())) /
                                          "sample_a" / "sites.csv"));
}

TEST_CASE("compare command on emitted fields") {
    std::ostringstream diag;
    const auto a = scratch("cmp_a");
    REQUIRE(run("solve", linear_config(8), a, diag) == kExitOk);
    RunConfig c;
    c.set("compare.a", (a / "field").string());
    c.set("compare.b", (a / "field").string());
    const auto out = scratch("cmp_out");
    REQUIRE(run("compare", c, out, diag) == kExitOk);
    CHECK(std::stod(summary(out).at("l2")) == 0.0);
    CHECK(std::stod(summary(out).at("linf")) == 0.0);
    c.set("compare.b", "");
    CHECK(run("compare", c, out, diag) == kExitConfig);
}

TEST_CASE("tension-eval on the lozenge model") {
    std::ostringstream diag;
    const auto dir = scratch("teval");
    auto c = RunConfig::parse("[tension]\nmodel = lozenge\n[tension-eval]\npoints = 0 0; 1/3 0\n");
    CHECK(run("tension-eval", c, dir, diag) == kExitConfig);
    c.set("tension-eval.points", "0 0; 0.3333333333333333 0");
    REQUIRE(run("tension-eval", c, dir, diag) == kExitOk);
    std::istringstream in(slurp(dir / "tension.csv"));
    std::string header, row;
    std::getline(in, header);
    std::getline(in, row);
    std::istringstream cells(row);
    std::string cell;
    std::vector<double> v;
    while (std::getline(cells, cell, ',')) v.push_back(std::stod(cell));
    REQUIRE(v.size() == 8);
    CHECK(v[2] == doctest::Approx(-0.32307).epsilon(1e-4));
}
