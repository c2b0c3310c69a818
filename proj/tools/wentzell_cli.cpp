#include <CLI11.hpp>

#include <cstdint>
#include <cstdio>
#include <string>
#include <vector>

#include "wentzell/wentzell.h"

namespace {

int report(wz_status s, const char* context) {
    std::fprintf(stderr, "error (%s): %s: %s\n", wz_status_name(s), context, wz_last_error());
    return wz_exit_code(s);
}

}  // namespace

int main(int argc, char** argv) {
    std::vector<std::string> commands;
    for (size_t i = 0; i < wz_command_count(); ++i) commands.emplace_back(wz_command_name(i));

    CLI::App app{"Controllability experiments for the stochastic heat equation with dynamic boundary conditions"};
    std::string command, config_path, out_dir = "out";
    std::uint64_t seed = 0;
    int paths = 0;
    bool quiet = false;
    app.add_option("command", command, "Experiment to run")->required()->check(CLI::IsMember(commands));
    app.add_option("--config", config_path, "YAML configuration file (defaults apply when omitted)");
    auto* seed_opt = app.add_option("--seed", seed, "Master seed, overrides run.seed");
    auto* paths_opt = app.add_option("--paths", paths, "Monte Carlo path count, overrides every path setting")
                          ->check(CLI::PositiveNumber);
    app.add_option("--out", out_dir, "Output directory")->capture_default_str();
    app.add_flag("--quiet", quiet, "Print only errors");
    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    wz_config* cfg = nullptr;
    wz_status s = config_path.empty() ? wz_config_default(&cfg) : wz_config_load(config_path.c_str(), &cfg);
    if (s != WZ_OK) return report(s, "loading configuration");
    if (*seed_opt && (s = wz_config_set_seed(cfg, seed)) != WZ_OK) {
        wz_config_free(cfg);
        return report(s, "--seed");
    }
    if (*paths_opt && (s = wz_config_set_paths(cfg, paths)) != WZ_OK) {
        wz_config_free(cfg);
        return report(s, "--paths");
    }

    wz_record* rec = nullptr;
    s = wz_run(cfg, command.c_str(), out_dir.c_str(), &rec);
    wz_config_free(cfg);
    if (s != WZ_OK) return report(s, command.c_str());
    if (!quiet) std::printf("%s\n", wz_record_json(rec));
    wz_record_free(rec);
    return 0;
}
