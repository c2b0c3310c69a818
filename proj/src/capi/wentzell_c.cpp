#include "wentzell/wentzell.h"

#include <memory>
#include <string>
#include <vector>

#include "core/result.hpp"
#include "core/solvers.hpp"
#include "harness/commands.hpp"
#include "harness/config.hpp"

using namespace wentzell;

struct wz_config {
    harness::ExperimentConfig cfg;
    std::string digest;
};

struct wz_record {
    harness::RunRecord record;
    std::string json;
};

struct wz_system {
    harness::Setup setup;
    ModalSystem sys;
};

namespace {

thread_local std::string g_last_error;

wz_status to_status(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::argument: return WZ_ERR_ARGUMENT;
        case ErrorKind::dimension: return WZ_ERR_DIMENSION;
        case ErrorKind::configuration: return WZ_ERR_CONFIG;
        case ErrorKind::numeric: return WZ_ERR_NUMERIC;
        case ErrorKind::unsupported: return WZ_ERR_UNSUPPORTED;
        case ErrorKind::measure_condition: return WZ_ERR_MEASURE_CONDITION;
        case ErrorKind::assertion: return WZ_ERR_ASSERTION;
        case ErrorKind::io: return WZ_ERR_IO;
        case ErrorKind::internal: return WZ_ERR_INTERNAL;
    }
    return WZ_ERR_INTERNAL;
}

ErrorKind to_kind(wz_status s) {
    switch (s) {
        case WZ_ERR_ARGUMENT: return ErrorKind::argument;
        case WZ_ERR_DIMENSION: return ErrorKind::dimension;
        case WZ_ERR_CONFIG: return ErrorKind::configuration;
        case WZ_ERR_NUMERIC: return ErrorKind::numeric;
        case WZ_ERR_UNSUPPORTED: return ErrorKind::unsupported;
        case WZ_ERR_MEASURE_CONDITION: return ErrorKind::measure_condition;
        case WZ_ERR_ASSERTION: return ErrorKind::assertion;
        case WZ_ERR_IO: return ErrorKind::io;
        default: return ErrorKind::internal;
    }
}

wz_status fail(const Failure& f) {
    g_last_error = f.message;
    return to_status(f.kind);
}

/// Runs f, mapping any exception to a status and the thread's last error.
template <class F>
wz_status guarded(F&& f) noexcept {
    try {
        f();
        g_last_error.clear();
        return WZ_OK;
    } catch (...) {
        return fail(current_failure());
    }
}

wz_status null_argument(const char* what) {
    g_last_error = std::string("null argument: ") + what;
    return WZ_ERR_ARGUMENT;
}

wz_status adopt(Result<harness::ExperimentConfig> r, wz_config** out) {
    if (!r) return fail(r.error());
    return guarded([&] {
        auto c = std::make_unique<wz_config>();
        c->cfg = std::move(r).value();
        c->digest = c->cfg.digest();
        *out = c.release();
    });
}

}  // namespace

extern "C" {

const char* wz_version(void) { return "0.1.0"; }

const char* wz_last_error(void) { return g_last_error.c_str(); }

const char* wz_status_name(wz_status status) {
    if (status == WZ_OK) return "ok";
    return to_string(to_kind(status));
}

int wz_exit_code(wz_status status) { return status == WZ_OK ? 0 : harness::exit_code(to_kind(status)); }

wz_status wz_config_default(wz_config** out) {
    if (!out) return null_argument("out");
    return adopt(harness::parse_config(""), out);
}

wz_status wz_config_load(const char* path, wz_config** out) {
    if (!path) return null_argument("path");
    if (!out) return null_argument("out");
    return adopt(harness::load_config(path), out);
}

wz_status wz_config_parse(const char* yaml_text, wz_config** out) {
    if (!yaml_text) return null_argument("yaml_text");
    if (!out) return null_argument("out");
    return adopt(harness::parse_config(yaml_text), out);
}

wz_status wz_config_set_seed(wz_config* cfg, uint64_t seed) {
    if (!cfg) return null_argument("cfg");
    return guarded([&] {
        cfg->cfg = harness::with_overrides(cfg->cfg, seed, std::nullopt);
        cfg->digest = cfg->cfg.digest();
    });
}

wz_status wz_config_set_paths(wz_config* cfg, int paths) {
    if (!cfg) return null_argument("cfg");
    return guarded([&] {
        cfg->cfg = harness::with_overrides(cfg->cfg, std::nullopt, paths);
        cfg->digest = cfg->cfg.digest();
    });
}

const char* wz_config_digest(const wz_config* cfg) { return cfg ? cfg->digest.c_str() : ""; }

uint64_t wz_config_seed(const wz_config* cfg) { return cfg ? cfg->cfg.seed : 0; }

void wz_config_free(wz_config* cfg) { delete cfg; }

size_t wz_command_count(void) { return harness::command_names().size(); }

const char* wz_command_name(size_t index) {
    const auto& names = harness::command_names();
    return index < names.size() ? names[index].c_str() : nullptr;
}

wz_status wz_run(const wz_config* cfg, const char* command, const char* out_dir, wz_record** out) {
    if (!cfg) return null_argument("cfg");
    if (!command) return null_argument("command");
    if (!out_dir) return null_argument("out_dir");
    return guarded([&] {
        auto rec = std::make_unique<wz_record>();
        rec->record = harness::run(command, cfg->cfg, out_dir);
        rec->json = rec->record.to_json().dump(2);
        if (out) *out = rec.release();
    });
}

const char* wz_record_command(const wz_record* rec) { return rec ? rec->record.command.c_str() : ""; }

const char* wz_record_json(const wz_record* rec) { return rec ? rec->json.c_str() : ""; }

size_t wz_record_scalar_count(const wz_record* rec) { return rec ? rec->record.scalars.size() : 0; }

const char* wz_record_scalar_name(const wz_record* rec, size_t index) {
    if (!rec || index >= rec->record.scalars.size()) return nullptr;
    return rec->record.scalars[index].first.c_str();
}

wz_status wz_record_scalar(const wz_record* rec, const char* name, double* value) {
    if (!rec) return null_argument("rec");
    if (!name) return null_argument("name");
    if (!value) return null_argument("value");
    return guarded([&] { *value = rec->record.scalar(name); });
}

size_t wz_record_output_count(const wz_record* rec) { return rec ? rec->record.outputs.size() : 0; }

const char* wz_record_output(const wz_record* rec, size_t index) {
    if (!rec || index >= rec->record.outputs.size()) return nullptr;
    return rec->record.outputs[index].c_str();
}

void wz_record_free(wz_record* rec) { delete rec; }

wz_status wz_system_create(const wz_config* cfg, int modes, wz_system** out) {
    if (!cfg) return null_argument("cfg");
    if (!out) return null_argument("out");
    return guarded([&] {
        harness::Setup setup = harness::build_setup(cfg->cfg);
        ModalSystem sys = setup.system(modes);
        *out = new wz_system{std::move(setup), std::move(sys)};
    });
}

int wz_system_modes(const wz_system* sys) { return sys ? sys->sys.modes() : 0; }

wz_status wz_system_eigenvalues(const wz_system* sys, double* values, size_t capacity, size_t* count) {
    if (!sys) return null_argument("sys");
    if (!values && capacity > 0) return null_argument("values");
    return guarded([&] {
        const auto n = std::min(capacity, static_cast<size_t>(sys->sys.modes()));
        for (size_t j = 0; j < n; ++j) values[j] = sys->sys.lambda(static_cast<int>(j));
        if (count) *count = n;
    });
}

wz_status wz_system_kappa(const wz_system* sys, double r, double* kappa) {
    if (!sys) return null_argument("sys");
    if (!kappa) return null_argument("kappa");
    return guarded([&] { *kappa = spectral_inequality_constant(sys->setup.basis, sys->setup.g0, r); });
}

wz_status wz_system_adjoint(const wz_system* sys, const double* terminal, double t, double* out) {
    if (!sys) return null_argument("sys");
    if (!terminal) return null_argument("terminal");
    if (!out) return null_argument("out");
    return guarded([&] {
        const int m = sys->sys.modes();
        if (!(t >= 0.0 && t <= sys->sys.horizon())) throw ArgumentError("adjoint time outside [0, T]");
        const Eigen::VectorXd z = adjoint_state(Eigen::Map<const Eigen::VectorXd>(terminal, m), sys->sys, t);
        Eigen::Map<Eigen::VectorXd>(out, m) = z;
    });
}

void wz_system_free(wz_system* sys) { delete sys; }

}  // extern "C"
