#pragma once

#include "limitshape/mesh.hpp"

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

namespace limitshape {

// ---------------------------------------------------------------------------
// Exit codes
// ---------------------------------------------------------------------------

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 1;          // bad config or input data
inline constexpr int kExitInadmissible = 2;
inline constexpr int kExitNonConvergence = 3;
inline constexpr int kExitOther = 4;           // I/O and unexpected failures

inline const std::vector<std::string> kCommands{"solve",    "obstacles",    "sample",   "compare",
                                                "diagnose", "tension-eval", "enumerate"};

// ---------------------------------------------------------------------------
// RunConfig
// ---------------------------------------------------------------------------

/// Flat "section.key" -> text values, with every key of the schema present
/// (defaults filled in). See docs/config.md for the grammar and keys.
class RunConfig {
public:
    /// Schema defaults only.
    RunConfig();
    /// Reads an INI file; unknown sections or keys raise ConfigError.
    static RunConfig load(const std::filesystem::path& path);
    static RunConfig parse(const std::string& text);

    /// Sets "section.key" = value; unknown keys raise ConfigError.
    void set(const std::string& key, const std::string& value);
    /// Applies "section.key=value".
    void apply_override(const std::string& assignment);

    [[nodiscard]] const std::string& text(const std::string& key) const;
    [[nodiscard]] double real(const std::string& key) const;
    [[nodiscard]] long integer(const std::string& key) const;
    [[nodiscard]] bool flag(const std::string& key) const;
    /// Whitespace-separated reals; `count` > 0 enforces the length.
    [[nodiscard]] std::vector<double> reals(const std::string& key, std::size_t count = 0) const;
    [[nodiscard]] bool is_set(const std::string& key) const { return explicit_.count(key) != 0; }

    [[nodiscard]] const std::map<std::string, std::string>& values() const noexcept { return values_; }

private:
    std::map<std::string, std::string> values_;
    std::map<std::string, bool> explicit_;
};

/// The schema: key -> (default, one-line description).
[[nodiscard]] const std::map<std::string, std::pair<std::string, std::string>>& config_schema();

// ---------------------------------------------------------------------------
// Field files and comparison
// ---------------------------------------------------------------------------

/// <stem>.nodes.csv (node,x,y,u) and <stem>.triangles.csv (triangle,a,b,c).
/// Returns the two paths.
std::vector<std::filesystem::path> write_field(const std::filesystem::path& stem, const ScalarField& u);
[[nodiscard]] ScalarField read_field(const std::filesystem::path& stem);

struct Comparison {
    double l2 = 0.0;    // area-weighted RMS of the nodal difference (P1 mass lumping)
    double linf = 0.0;  // max nodal difference
    std::vector<double> other;  // b at the nodes of a
};

/// Compares on a's mesh. b is used nodewise when the meshes share nodes,
/// otherwise interpolated; MeshMismatchError when a node of a is outside b.
[[nodiscard]] Comparison compare(const ScalarField& a, const ScalarField& b);

/// 17 significant digits.
[[nodiscard]] std::string format_real(double v);

/// Lowercase hex SHA-256 of a file's bytes.
[[nodiscard]] std::string sha256_file(const std::filesystem::path& path);

/// 16-bit binary PGM of the field over its bounding box; 0 outside the domain,
/// 1..65535 spanning [min u, max u].
void write_pgm(const std::filesystem::path& path, const ScalarField& u, int width);

// ---------------------------------------------------------------------------
// run
// ---------------------------------------------------------------------------

/// Executes one command, writing its files, summary.txt and manifest.txt
/// into `out`. Errors are reported on `diag` and mapped to exit codes.
int run(const std::string& command, const RunConfig& config, const std::filesystem::path& out, std::ostream& diag);

}  // namespace limitshape
