// limitshape <command> --config <path> [--out <dir>] [--seed <u64>] [--override key=value ...]

#include "limitshape/cli.hpp"

#include <CLI11.hpp>

#include <iostream>

int main(int argc, char** argv) {
    CLI::App app{"Gradient-constrained minimizers, lozenge tilings and regularity diagnostics"};
    std::string command, config_path, out = "out", seed;
    std::vector<std::string> overrides;
    bool list_keys = false;
    app.add_option("command", command, "solve, obstacles, sample, compare, diagnose, tension-eval or enumerate");
    app.add_option("--config", config_path, "INI-style run configuration");
    app.add_option("--out", out, "output directory")->capture_default_str();
    app.add_option("--seed", seed, "overrides run.seed");
    app.add_option("--override", overrides, "section.key=value, applied after the config file");
    app.add_flag("--list-keys", list_keys, "print every config key with its default and exit");
    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : limitshape::kExitConfig;
    }

    if (list_keys) {
        for (const auto& [key, entry] : limitshape::config_schema())
            std::cout << key << " = " << entry.first << "    ; " << entry.second << '\n';
        return 0;
    }
    if (command.empty()) {
        std::cerr << "error: a command is required\n" << app.help();
        return limitshape::kExitConfig;
    }

    limitshape::RunConfig config;
    try {
        if (!config_path.empty()) config = limitshape::RunConfig::load(config_path);
        for (const auto& o : overrides) config.apply_override(o);
        if (!seed.empty()) {
            std::size_t used = 0;
            (void)std::stoull(seed, &used);
            if (used != seed.size() || seed[0] == '-') throw limitshape::ConfigError("--seed must be an unsigned integer");
            config.set("run.seed", seed);
        }
    } catch (const std::logic_error&) {
        std::cerr << "error: --seed must be an unsigned 64-bit integer\n";
        return limitshape::kExitConfig;
    } catch (const limitshape::Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return limitshape::kExitConfig;
    }
    return limitshape::run(command, config, out, std::cerr);
}
