// Batch front end: qcdirac <check|propagate|sample|respond> --config FILE [--seed N] [--threads N] [--out DIR]
#include <cstdio>
#include <iostream>

#include <CLI11.hpp>

#include "qcdirac/app.hpp"
#include "qcdirac/errors.hpp"
#include "qcdirac/parallel.hpp"

using namespace qcdirac;

namespace {

// exit codes
constexpr int kCheckFailed = 1;
constexpr int kBadConfig = 2;
constexpr int kRunFailed = 3;

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Constrained quantum-classical dynamics: checks, ensembles, sampling and response"};
    app.require_subcommand(1, 1);

    std::string config_path;
    std::uint64_t seed = 0;
    int threads = 0;
    std::string out;
    bool seed_given = false;

    for (const char* name : {"check", "propagate", "sample", "respond"}) {
        auto* sub = app.add_subcommand(name);
        sub->add_option("--config", config_path, "JSON config file")->required();
        sub->add_option("--seed", seed, "override the config seed");
        sub->add_option("--threads", threads, "worker threads (results do not depend on it)");
        sub->add_option("--out", out, "output directory (overrides the config)");
    }
    CLI11_PARSE(app, argc, argv);
    const std::string command = app.get_subcommands().front()->get_name();
    seed_given = app.get_subcommands().front()->count("--seed") > 0;

    RunConfig cfg;
    try {
        cfg = load_config(config_path);
        if (seed_given) cfg.seed = seed;
        if (!out.empty()) cfg.output = out;
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return kBadConfig;
    }
    set_threads(threads);

    try {
        if (command == "check") {
            const CheckReport report = run_check(cfg);
            const std::string text = report.to_json().dump(2) + "\n";
            std::cout << text;
            if (!out.empty()) write_artifacts({"", text, config_echo(cfg)}, cfg.output);
            return report.passed() ? 0 : kCheckFailed;
        }
        write_artifacts(run_command(cfg, command), cfg.output);
        std::fprintf(stderr, "wrote %s/{series.csv,summary.json,config.echo}\n", cfg.output.c_str());
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return kBadConfig;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kRunFailed;
    }
    return 0;
}
