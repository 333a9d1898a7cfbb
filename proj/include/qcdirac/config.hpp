#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "qcdirac/propagator.hpp"

namespace qcdirac {

struct InitialConfig {
    std::string kind = "stationary";  // stationary | point
    int surface = -1;                 // -1: as sampled; otherwise forced onto this surface
    std::vector<double> R;            // point: defaults to the gallery start
    std::vector<double> P;            // point: defaults to zero

    bool operator==(const InitialConfig&) const = default;
};

struct PropagateConfig {
    double t_end = 1.0;
    double interval = 0.1;
    std::vector<std::string> observables{"population:0", "identity"};
    InitialConfig initial;

    bool operator==(const PropagateConfig&) const = default;
};

struct SampleConfig {
    std::size_t count = 1000;
    std::size_t chains = 8;
    std::size_t burn_in = 500;
    std::size_t thin = 10;
    double step = 0.3;
    bool fredholm = true;

    bool operator==(const SampleConfig&) const = default;
};

struct ForceConfig {
    std::string kind = "zero";  // zero | step | impulse | sine
    double amplitude = 1.0;
    double frequency = 1.0;     // sine only

    bool operator==(const ForceConfig&) const = default;
};

struct RespondConfig {
    std::string B = "identity";
    std::string A = "position:0";
    double t_end = 1.0;
    double interval = 0.1;
    std::size_t samples = 200;
    bool order_hbar = true;
    ForceConfig force;

    bool operator==(const RespondConfig&) const = default;
};

struct CheckConfig {
    std::size_t points = 100;

    bool operator==(const CheckConfig&) const = default;
};

struct RunConfig {
    std::string model = "two-level-linear";
    nlohmann::json model_params = nlohmann::json::object();
    std::string constraints = "dimer-bond";
    nlohmann::json constraint_params = nlohmann::json::object();
    nlohmann::json masses = 1.0;
    double hbar = 1.0;
    double beta = 1.0;
    IntegratorConfig integrator;
    std::size_t trajectories = 100;
    std::uint64_t seed = 1;
    PropagateConfig propagate;
    SampleConfig sample;
    RespondConfig respond;
    CheckConfig check;
    std::string output = "out";  // not echoed

    bool operator==(const RunConfig& o) const;
};

/// Strict parse: unknown keys and wrong types raise ConfigError naming the field path.
RunConfig config_from_json(const nlohmann::json& j);
/// Parses text; syntax errors raise ConfigError with the line number.
RunConfig parse_config(const std::string& text, const std::string& source = "config");
RunConfig load_config(const std::string& path);

/// Canonical, fully resolved form (every default spelled out). Output directory and thread
/// count are left out so that the echo, and everything derived from it, is location independent.
nlohmann::json config_to_json(const RunConfig& c);
std::string config_echo(const RunConfig& c);

}  // namespace qcdirac
