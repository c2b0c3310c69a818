#pragma once

#include <cstdint>
#include <nlohmann/json.hpp>
#include <string>
#include <utility>
#include <vector>

#include "core/errors.hpp"
#include "harness/config.hpp"

namespace wentzell::harness {

/// Outcome of one command. Scalars keep insertion order; non-finite values
/// are serialized as the strings "inf", "-inf" or "nan".
struct RunRecord {
    std::string command;
    std::string config_digest;
    std::uint64_t seed = 0;
    double wall_time = 0.0;
    std::vector<std::string> outputs;
    std::vector<std::pair<std::string, double>> scalars;
    std::vector<std::pair<std::string, std::string>> notes;

    void set(const std::string& name, double value);
    void note(const std::string& name, const std::string& value);
    /// Throws ArgumentError for unknown names.
    double scalar(const std::string& name) const;
    nlohmann::ordered_json to_json() const;
};

const std::vector<std::string>& command_names();

/// Runs one command, writes its CSV/SVG outputs and run_record.json into
/// out_dir (created if missing) and returns the record.
RunRecord run(const std::string& command, const ExperimentConfig& cfg, const std::string& out_dir);

/// Process exit code for an error kind: 2 configuration/usage, 3 numeric,
/// 4 assertion, 5 measure-condition or unsupported, 1 otherwise.
int exit_code(ErrorKind kind) noexcept;

}  // namespace wentzell::harness
