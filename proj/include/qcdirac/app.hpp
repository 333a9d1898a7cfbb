#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "qcdirac/config.hpp"
#include "qcdirac/gallery.hpp"

namespace qcdirac {

struct CheckItem {
    std::string name;
    std::string status;  // pass | fail | skipped
    double measured = 0.0;
    double tolerance = 0.0;
    std::string detail;
};

struct CheckReport {
    std::vector<CheckItem> items;

    bool passed() const;
    const CheckItem* find(const std::string& name) const;
    nlohmann::json to_json() const;
};

/// Model + constraints + masses from the config; gallery errors become ConfigError.
System build_system(const RunConfig& config);

/// Runs every invariant check on the configured system.
CheckReport run_check(const RunConfig& config);
/// Same, on a caller-supplied system (lets tests plant a broken derivative).
CheckReport run_check(const RunConfig& config, const System& system);

/// The three files a command produces, as bytes.
struct Artifacts {
    std::string series;   // series.csv (empty for check)
    std::string summary;  // summary.json
    std::string echo;     // config.echo
};

/// Computes the outputs of propagate, sample or respond. Parallel loops use whatever thread count
/// is set; the bytes do not depend on it.
Artifacts run_command(const RunConfig& config, const std::string& command);

/// Writes the artifacts into `out` through a staging directory next to it, so readers never see a
/// half-written set. On failure the staging directory is removed and RunError names the path.
void write_artifacts(const Artifacts& artifacts, const std::filesystem::path& out);

}  // namespace qcdirac
