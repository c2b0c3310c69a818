#include "harness/config.hpp"

#include <yaml-cpp/yaml.h>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <openssl/evp.h>
#include <sstream>

#include "core/errors.hpp"

namespace wentzell::harness {

namespace {

nlohmann::json scalar_to_json(const YAML::Node& node) {
    const std::string& text = node.Scalar();
    if (node.Tag() == "!") return text;  // quoted scalars stay strings
    if (text == "true" || text == "True") return true;
    if (text == "false" || text == "False") return false;
    if (text == "null" || text == "~" || text.empty()) return nullptr;
    try {
        std::size_t used = 0;
        const long long v = std::stoll(text, &used);
        if (used == text.size()) return v;
    } catch (const std::exception&) {
    }
    try {
        std::size_t used = 0;
        const double v = std::stod(text, &used);
        if (used == text.size()) return v;
    } catch (const std::exception&) {
    }
    return text;
}

nlohmann::json yaml_to_json(const YAML::Node& node) {
    switch (node.Type()) {
        case YAML::NodeType::Null:
        case YAML::NodeType::Undefined: return nullptr;
        case YAML::NodeType::Scalar: return scalar_to_json(node);
        case YAML::NodeType::Sequence: {
            nlohmann::json arr = nlohmann::json::array();
            for (const auto& item : node) arr.push_back(yaml_to_json(item));
            return arr;
        }
        case YAML::NodeType::Map: {
            nlohmann::json obj = nlohmann::json::object();
            for (const auto& kv : node) obj[kv.first.as<std::string>()] = yaml_to_json(kv.second);
            return obj;
        }
    }
    return nullptr;
}

template <class T>
T require(const nlohmann::json& j, const char* section, const char* key) {
    if (!j.contains(section) || !j[section].is_object())
        throw ConfigError(std::string("missing config section '") + section + "'");
    const auto& s = j[section];
    if (!s.contains(key)) throw ConfigError(std::string("missing config key '") + section + "." + key + "'");
    try {
        return s[key].get<T>();
    } catch (const nlohmann::json::exception&) {
        throw ConfigError(std::string("config key '") + section + "." + key + "' has the wrong type");
    }
}

PiecewiseSpec parse_piecewise(const nlohmann::json& j, const char* what) {
    PiecewiseSpec p;
    if (j.is_number()) {
        p.values = {j.get<double>()};
        return p;
    }
    if (!j.is_object() || !j.contains("breaks") || !j.contains("values"))
        throw ConfigError(std::string("coefficient '") + what + "' needs breaks and values or a single number");
    try {
        p.breaks = j["breaks"].get<std::vector<double>>();
        p.values = j["values"].get<std::vector<double>>();
    } catch (const nlohmann::json::exception&) {
        throw ConfigError(std::string("coefficient '") + what + "' breaks/values must be number lists");
    }
    return p;
}

PiecewiseConstant to_piecewise(const PiecewiseSpec& p, double horizon) {
    if (p.breaks.empty()) return PiecewiseConstant::constant(horizon, p.values.at(0));
    return PiecewiseConstant(p.breaks, p.values);
}

void check_inside(const std::vector<Interval>& v, double lo, double hi, const char* what) {
    for (const auto& i : v)
        if (!(i.lo >= lo && i.hi <= hi && i.hi > i.lo))
            throw ConfigError(std::string(what) + " interval lies outside its bounds or is empty");
}

ExperimentConfig validate(nlohmann::json doc) {
    ExperimentConfig c;
    c.length = require<double>(doc, "domain", "length");
    c.n_cells = require<int>(doc, "domain", "n_cells");
    c.g0 = parse_intervals(doc["domain"]["g0"], "domain.g0");
    c.horizon = require<double>(doc, "time", "T");
    c.e = parse_intervals(doc["time"]["E"], "time.E");
    c.n_steps = require<int>(doc, "time", "n_steps");
    if (!doc.contains("coefficients")) throw ConfigError("missing config section 'coefficients'");
    c.a = parse_piecewise(doc["coefficients"]["a"], "a");
    c.b = parse_piecewise(doc["coefficients"]["b"], "b");
    c.seed = require<std::uint64_t>(doc, "run", "seed");
    c.paths = require<int>(doc, "run", "paths");
    c.modes = require<int>(doc, "run", "modes");
    c.tolerance = require<double>(doc, "run", "tolerance");

    if (!(c.length > 0.0)) throw ConfigError("domain.length must be positive");
    if (c.n_cells < 3) throw ConfigError("domain.n_cells must be at least 3");
    if (!(c.horizon > 0.0)) throw ConfigError("time.T must be positive");
    if (c.n_steps < 1) throw ConfigError("time.n_steps must be positive");
    if (c.paths < 1) throw ConfigError("run.paths must be positive");
    if (c.modes < 1 || c.modes > c.n_cells + 1) throw ConfigError("run.modes must lie in 1..n_cells+1");
    if (!(c.tolerance > 0.0)) throw ConfigError("run.tolerance must be positive");
    check_inside(c.g0, 0.0, c.length, "domain.g0");
    check_inside(c.e, 0.0, c.horizon, "time.E");
    if (c.g0.empty()) throw ConfigError("domain.g0 must be nonempty");

    try {
        c.coefficients().check_aligned(c.horizon / c.n_steps);
        IntervalSet(c.g0).measure();
        IntervalSet(c.e).measure();
    } catch (const Error& e) {
        throw ConfigError(std::string("invalid config: ") + e.what());
    }
    if (doc.contains("commands") && !doc["commands"].is_object()) throw ConfigError("'commands' must be a map");
    c.document = std::move(doc);
    return c;
}

}  // namespace

const char* default_config_yaml() {
    return R"(domain:
  length: 1.0
  n_cells: 128
  g0: [[0.1, 0.8]]
time:
  T: 1.0
  E: [[0.1, 0.45], [0.55, 1.0]]
  n_steps: 4096
coefficients:
  a: {breaks: [0.0, 0.5, 1.0], values: [0.5, -0.3]}
  b: {breaks: [0.0, 0.5, 1.0], values: [0.4, 0.6]}
run:
  seed: 20240521
  paths: 1000
  modes: 16
  tolerance: 1.0e-6
commands:
  spectrum: {count: 40}
  spectral-inequality: {windows: 20}
  interpolation: {modes: 16, times: 12, states: 64, decay_states: 100, decay_times: 10, decay_windows: 5}
  slicing: {s: 0.0, modes: 16, states: 8, iterations: 5}
  observability: {s: 0.0, modes: 8, starts: 24}
  null-control: {modes: 16, partial_modes: 8, growth: 4.0, control_fraction: 0.5, max_stages: 12, initial_window: 0.0}
  approx-control: {modes: 8, eps: 1.0e-3}
  counterexample: {E: [[0.0, 0.4]], s0: 0.4, paths: 100000, n_steps: 1000}
  duality-check: {modes: 8, paths: 10000, n_steps: 512}
)";
}

const nlohmann::json& ExperimentConfig::command(const std::string& name) const {
    static const nlohmann::json empty = nlohmann::json::object();
    if (!document.contains("commands")) return empty;
    const auto& cmds = document["commands"];
    auto it = cmds.find(name);
    return it == cmds.end() || !it->is_object() ? empty : *it;
}

std::string ExperimentConfig::digest() const { return sha256_hex(document.dump()); }

CoefficientPair ExperimentConfig::coefficients() const {
    return CoefficientPair(to_piecewise(a, horizon), to_piecewise(b, horizon));
}

std::vector<Interval> parse_intervals(const nlohmann::json& j, const char* what) {
    std::vector<Interval> out;
    if (j.is_null()) return out;
    if (!j.is_array()) throw ConfigError(std::string(what) + " must be a list of [lo, hi] pairs");
    for (const auto& item : j) {
        if (!item.is_array() || item.size() != 2 || !item[0].is_number() || !item[1].is_number())
            throw ConfigError(std::string(what) + " entries must be [lo, hi] number pairs");
        out.push_back({item[0].get<double>(), item[1].get<double>()});
    }
    return out;
}

Result<ExperimentConfig> parse_config(const std::string& yaml_text) {
    return capture([&] {
        nlohmann::json doc = yaml_to_json(YAML::Load(default_config_yaml()));
        nlohmann::json user;
        try {
            user = yaml_to_json(YAML::Load(yaml_text));
        } catch (const YAML::Exception& e) {
            throw ConfigError(std::string("config is not valid YAML: ") + e.what());
        }
        if (!user.is_null()) {
            if (!user.is_object()) throw ConfigError("config root must be a map");
            doc.merge_patch(user);
        }
        return validate(std::move(doc));
    });
}

Result<ExperimentConfig> load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) return Failure{ErrorKind::configuration, "cannot open config file '" + path + "'"};
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str());
}

ExperimentConfig default_config() { return parse_config("").value(); }

ExperimentConfig with_overrides(const ExperimentConfig& cfg, std::optional<std::uint64_t> seed,
                                std::optional<int> paths) {
    nlohmann::json doc = cfg.document;
    if (seed) doc["run"]["seed"] = *seed;
    if (paths) {
        doc["run"]["paths"] = *paths;
        // An explicit path count also replaces per-command counts.
        if (doc.contains("commands"))
            for (auto& [name, block] : doc["commands"].items())
                if (block.is_object()) block.erase("paths");
    }
    return validate(std::move(doc));
}

std::string sha256_hex(const std::string& bytes) {
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(bytes.data(), bytes.size(), md, &len, EVP_sha256(), nullptr) != 1)
        throw IoError("SHA-256 digest failed");
    std::string hex;
    char buf[3];
    for (unsigned int i = 0; i < len; ++i) {
        std::snprintf(buf, sizeof buf, "%02x", md[i]);
        hex += buf;
    }
    return hex;
}

ModalSystem Setup::system(int modes, const std::optional<std::vector<Interval>>& e) const {
    TimeSet ts = e ? TimeSet(time_set.horizon(), IntervalSet(*e)) : time_set;
    return ModalSystem(basis, g0, std::move(ts), coefficients, modes);
}

Setup build_setup(const ExperimentConfig& cfg) {
    Domain domain(cfg.length, cfg.n_cells);
    ControlRegion g0(domain, IntervalSet(cfg.g0));
    WentzellOperator op = WentzellOperator::assemble(domain);
    SpectralBasis basis = eigendecompose(op);
    return Setup{domain, g0, op, basis, TimeSet(cfg.horizon, IntervalSet(cfg.e)), cfg.coefficients()};
}

}  // namespace wentzell::harness
