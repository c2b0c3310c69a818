#pragma once

#include <cstdint>
#include <nlohmann/json.hpp>
#include <optional>
#include <string>
#include <vector>

#include "core/coefficients.hpp"
#include "core/control.hpp"
#include "core/domain.hpp"
#include "core/intervals.hpp"
#include "core/result.hpp"
#include "core/system.hpp"
#include "core/wentzell_operator.hpp"

namespace wentzell::harness {

struct PiecewiseSpec {
    std::vector<double> breaks;
    std::vector<double> values;
};

/// Validated experiment configuration. `document` is the effective
/// configuration (defaults merged with the file and overrides); its canonical
/// serialization defines the digest.
struct ExperimentConfig {
    double length = 1.0;
    int n_cells = 128;
    std::vector<Interval> g0;
    double horizon = 1.0;
    std::vector<Interval> e;
    int n_steps = 4096;
    PiecewiseSpec a;
    PiecewiseSpec b;
    std::uint64_t seed = 0;
    int paths = 1000;
    int modes = 16;
    double tolerance = 1e-6;
    nlohmann::json document;

    /// Block for one command ({} when absent).
    const nlohmann::json& command(const std::string& name) const;
    /// Lowercase hex SHA-256 of the canonical document.
    std::string digest() const;
    CoefficientPair coefficients() const;
};

/// Built-in defaults as a YAML document.
const char* default_config_yaml();

Result<ExperimentConfig> parse_config(const std::string& yaml_text);
Result<ExperimentConfig> load_config(const std::string& path);
ExperimentConfig default_config();

/// Re-validates after changing the seed or the path count.
ExperimentConfig with_overrides(const ExperimentConfig& cfg, std::optional<std::uint64_t> seed,
                                std::optional<int> paths);

std::string sha256_hex(const std::string& bytes);

/// Spatial and spectral objects for one configuration.
struct Setup {
    Domain domain;
    ControlRegion g0;
    WentzellOperator op;
    SpectralBasis basis;
    TimeSet time_set;
    CoefficientPair coefficients;

    /// Modal view with `modes` retained modes; `e` replaces the configured E.
    ModalSystem system(int modes, const std::optional<std::vector<Interval>>& e = std::nullopt) const;
};

Setup build_setup(const ExperimentConfig& cfg);

/// Interval list from a JSON array of [lo, hi] pairs.
std::vector<Interval> parse_intervals(const nlohmann::json& j, const char* what);

}  // namespace wentzell::harness
