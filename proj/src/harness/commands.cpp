#include "harness/commands.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <optional>
#include <random>
#include <sstream>

#include "core/control.hpp"
#include "core/noise.hpp"
#include "core/observability.hpp"
#include "core/solvers.hpp"
#include "core/stats.hpp"
#include "harness/csv.hpp"
#include "harness/svg.hpp"

namespace wentzell::harness {

namespace {

namespace fs = std::filesystem;

/// Output bookkeeping for one command run.
struct Context {
    const ExperimentConfig& cfg;
    const nlohmann::json& block;
    fs::path dir;
    std::string digest;
    RunRecord& record;

    CsvWriter csv(const std::string& name, std::vector<std::string> header) const {
        const std::string path = (dir / name).string();
        record.outputs.push_back(name);
        return CsvWriter(path, digest, std::move(header));
    }
    void svg(const std::string& name, const Chart& chart) const {
        write_svg((dir / name).string(), digest, chart);
        record.outputs.push_back(name);
    }
    template <class T>
    T get(const char* key, T fallback) const {
        if (!block.contains(key)) return fallback;
        try {
            return block[key].get<T>();
        } catch (const nlohmann::json::exception&) {
            throw ConfigError(std::string("command option '") + key + "' has the wrong type");
        }
    }
    int modes(int fallback) const {
        const int m = get<int>("modes", fallback);
        if (m < 1 || m > cfg.n_cells + 1) throw ConfigError("command option 'modes' out of range");
        return m;
    }
    int paths() const {
        const int p = get<int>("paths", cfg.paths);
        if (p < 1) throw ConfigError("command option 'paths' must be positive");
        return p;
    }
    std::optional<std::vector<Interval>> time_set_override() const {
        if (!block.contains("E")) return std::nullopt;
        return parse_intervals(block["E"], "E");
    }
};

/// Independent stream per command so commands do not share random states.
std::mt19937_64 command_rng(std::uint64_t seed, const std::string& name) {
    std::uint32_t tag = 2166136261u;  // FNV-1a, stable across platforms
    for (unsigned char ch : name) tag = (tag ^ ch) * 16777619u;
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32), tag};
    return std::mt19937_64(seq);
}

Eigen::VectorXd random_unit(int m, std::mt19937_64& rng) {
    std::normal_distribution<double> normal;
    Eigen::VectorXd v(m);
    do {
        for (int j = 0; j < m; ++j) v[j] = normal(rng);
    } while (v.norm() == 0.0);
    return v / v.norm();
}

void require(bool ok, const std::string& what) {
    if (!ok) throw AssertionFailure(what);
}

void cmd_spectrum(const Context& ctx, const Setup& s) {
    const int count = std::clamp(ctx.get<int>("count", 40), 1, s.basis.count());
    auto csv = ctx.csv("spectrum.csv", {"j", "lambda", "residual"});
    Chart chart{"Eigenvalues of the Wentzell operator", "j", "lambda_j", false, {{"lambda_j", {}, {}}}};
    double max_res = 0.0;
    for (int j = 0; j < count; ++j) {
        const double res = s.basis.residual(s.op, j);
        max_res = std::max(max_res, res);
        csv.row({static_cast<long long>(j + 1), s.basis.lambda(j), res});
        chart.series[0].x.push_back(j + 1);
        chart.series[0].y.push_back(s.basis.lambda(j));
    }
    csv.close();
    ctx.svg("spectrum.svg", chart);

    std::mt19937_64 rng = command_rng(ctx.cfg.seed, "spectrum");
    std::normal_distribution<double> normal;
    double defect = 0.0, dissip = -std::numeric_limits<double>::infinity();
    for (int k = 0; k < 100; ++k) {
        NodalField u(s.domain.size()), v(s.domain.size());
        for (Eigen::Index i = 0; i < u.size(); ++i) u[i] = normal(rng), v[i] = normal(rng);
        defect = std::max(defect, s.op.self_adjointness_defect(u, v));
        dissip = std::max(dissip, s.op.inner_product(s.op.apply(u), u) / s.op.inner_product(u, u));
    }
    const NodalField ones = NodalField::Ones(s.domain.size());
    const double const_res = std::sqrt(s.op.inner_product(s.op.apply(ones), s.op.apply(ones)));
    ctx.record.set("lambda_1", s.basis.lambda(0));
    if (s.basis.count() > 1) ctx.record.set("lambda_2", s.basis.lambda(1));
    ctx.record.set("max_residual", max_res);
    ctx.record.set("self_adjointness_defect", defect);
    ctx.record.set("max_dissipation_quotient", dissip);
    ctx.record.set("constant_residual", const_res);
    require(std::abs(s.basis.lambda(0)) <= 1e-10 * std::max(1.0, s.basis.lambda(count - 1)),
            "lowest eigenvalue is not zero");
}

void cmd_spectral_inequality(const Context& ctx, const Setup& s) {
    const int windows = std::clamp(ctx.get<int>("windows", 20), 2, s.basis.count());
    auto csv = ctx.csv("spectral_inequality.csv", {"k", "r", "modes", "kappa", "log_kappa"});
    std::vector<double> x, y;
    bool monotone = true;
    for (int k = 0; k < windows; ++k) {
        const double r = s.basis.lambda(k);
        const double kappa = spectral_inequality_constant(s.basis, s.g0, r);
        if (!y.empty() && std::log(kappa) < y.back()) monotone = false;
        x.push_back(std::sqrt(r));
        y.push_back(std::log(kappa));
        csv.row({static_cast<long long>(k + 1), r, static_cast<long long>(spectral_window(s.basis, r).size()), kappa,
                 y.back()});
    }
    csv.close();
    const LineFit fit = fit_line(x, y);
    Chart chart{"Spectral inequality constant", "sqrt(r)", "log kappa(r)", false,
                {{"log kappa", x, y}, {"fit", x, {}}}};
    for (double v : x) chart.series[1].y.push_back(fit.intercept + fit.slope * v);
    ctx.svg("spectral_inequality.svg", chart);
    ctx.record.set("windows", windows);
    ctx.record.set("monotone", monotone ? 1.0 : 0.0);
    ctx.record.set("fit_slope", fit.slope);
    ctx.record.set("fit_intercept", fit.intercept);
    ctx.record.set("fit_residual_rms", fit.residual_rms);
    ctx.record.set("fit_max_residual", fit.max_abs_residual);
    ctx.record.set("fit_r_squared", fit.r_squared);
}

std::vector<double> sweep_times(double T, int n) {
    std::vector<double> t;
    for (int i = 0; i < n; ++i) t.push_back(T * (1.0 - std::ldexp(1.0, -i)));
    return t;
}

void cmd_interpolation(const Context& ctx, const Setup& s) {
    const ModalSystem sys = s.system(ctx.modes(16));
    const double T = sys.horizon();
    const auto times = sweep_times(T, ctx.get<int>("times", 12));
    const auto prof = interpolation_sweep(sys, times, ctx.get<int>("states", 64), ctx.cfg.seed);

    auto csv = ctx.csv("interpolation.csv", {"t", "inv_gap", "worst_ratio", "bound"});
    Chart chart{"Interpolation ratio", "1/(T-t)", "ratio", true, {{"worst ratio", {}, {}}, {"C exp(C/(T-t))", {}, {}}}};
    for (std::size_t i = 0; i < times.size(); ++i) {
        const double x = 1.0 / (T - times[i]);
        const double bound = prof.dominating_constant * std::exp(prof.dominating_constant * x);
        csv.row({times[i], x, prof.worst[i], bound});
        chart.series[0].x.push_back(x);
        chart.series[0].y.push_back(prof.worst[i]);
        chart.series[1].x.push_back(x);
        chart.series[1].y.push_back(bound);
    }
    csv.close();
    ctx.svg("interpolation.svg", chart);

    // High-mode decay over random terminal states, times and windows.
    std::mt19937_64 rng = command_rng(ctx.cfg.seed, "interpolation-decay");
    const int n_states = ctx.get<int>("decay_states", 100);
    const int n_times = ctx.get<int>("decay_times", 10);
    const int n_windows = std::min(ctx.get<int>("decay_windows", 5), sys.modes() - 1);
    long checks = 0, violations = 0;
    double worst = 0.0;
    for (int k = 0; k < n_states; ++k) {
        const ModeState zT{random_unit(sys.modes(), rng), T};
        for (int i = 0; i < n_times; ++i) {
            const double t = T * i / n_times;
            for (int w = 0; w < n_windows; ++w) {
                const double r = sys.lambda((w + 1) * (sys.modes() - 1) / std::max(1, n_windows));
                const auto d = check_highmode_decay(zT, r, t, sys);
                ++checks;
                if (!d.holds()) ++violations;
                if (d.rhs > 0.0) worst = std::max(worst, d.lhs / d.rhs);
            }
        }
    }
    ctx.record.set("dominating_constant", prof.dominating_constant);
    ctx.record.set("fit_slope", prof.log_ratio_fit.slope);
    ctx.record.set("fit_intercept", prof.log_ratio_fit.intercept);
    ctx.record.set("a_max", prof.a_max);
    ctx.record.set("a_bound", prof.a_bound);
    ctx.record.set("decay_checks", static_cast<double>(checks));
    ctx.record.set("decay_violations", static_cast<double>(violations));
    ctx.record.set("decay_worst_ratio", worst);
    require(violations == 0, "high-mode decay inequality violated");
    require(prof.a_max <= prof.a_bound * (1.0 + 1e-12), "ratio A exceeds its energy bound");
}

/// Constant C used both for the slice inequality and the interpolation fit,
/// iterated until the slicing built from C needs no larger constant.
struct SlicingResult {
    SlicingSequence seq;
    double c = 0.0;
    int iterations = 0;
};

SlicingResult fitted_slicing(const ModalSystem& sys, double s, double dt, const std::vector<Eigen::VectorXd>& states,
                             int max_iterations, std::uint64_t seed) {
    const double T = sys.horizon();
    const double c_interp = interpolation_sweep(sys, sweep_times(T, 12), 32, seed).dominating_constant;
    SlicingResult r;
    r.c = c_interp;
    r.seq = build_slicing(sys.time_set(), s, r.c, dt);
    for (r.iterations = 1; r.iterations <= max_iterations; ++r.iterations) {
        const double c_new = std::max(c_interp, slice_constant(states, r.seq, sys));
        if (!(c_new > r.c * (1.0 + 1e-12))) break;
        r.c = c_new;
        r.seq = build_slicing(sys.time_set(), s, r.c, dt);
    }
    return r;
}

void cmd_slicing(const Context& ctx, const Setup& s) {
    const ModalSystem sys = s.system(ctx.modes(16), ctx.time_set_override());
    const double dt = sys.horizon() / ctx.cfg.n_steps;
    std::mt19937_64 rng = command_rng(ctx.cfg.seed, "slicing");
    std::vector<Eigen::VectorXd> states;
    for (int k = 0; k < ctx.get<int>("states", 8); ++k) states.push_back(random_unit(sys.modes(), rng));
    const auto fitted = fitted_slicing(sys, ctx.get<double>("s", 0.0), dt, states, ctx.get<int>("iterations", 5),
                                       ctx.cfg.seed);
    const auto& seq = fitted.seq;
    const auto check = verify_slicing(seq, sys.time_set());

    auto csv = ctx.csv("slicing.csv", {"i", "t_i", "eta_i", "gap", "mass_ratio", "eta_mass_ratio"});
    for (int i = 0; i < seq.truncation; ++i) {
        const auto ii = static_cast<std::size_t>(i);
        const double a = seq.times[ii], b = seq.times[ii + 1];
        const auto& e = sys.time_set().intervals();
        csv.row({static_cast<long long>(i + 1), a, seq.etas[ii], b - a, e.measure_within(a, b) / (b - a),
                 e.measure_within(a, seq.etas[ii]) / (b - a)});
    }
    csv.close();

    int tele_ok = 0;
    for (const auto& z : states)
        if (check_telescoping(z, seq, sys, fitted.c).ok()) ++tele_ok;
    ctx.record.set("c", fitted.c);
    ctx.record.set("iterations", fitted.iterations);
    ctx.record.set("rho", seq.rho);
    ctx.record.set("truncation", seq.truncation);
    ctx.record.set("t_1", seq.times.front());
    ctx.record.set("t_tilde", seq.t_tilde);
    ctx.record.set("p2", check.p2);
    ctx.record.set("p3", check.p3);
    ctx.record.set("inemes", check.inemes);
    ctx.record.set("monotone", check.monotone);
    ctx.record.set("worst_p2_ratio", check.worst_p2_ratio);
    ctx.record.set("worst_inemes_ratio", check.worst_inemes_ratio);
    ctx.record.set("worst_p3_defect_ulps", check.worst_p3_defect);
    ctx.record.set("telescoping_ok", tele_ok);
    ctx.record.set("telescoping_states", static_cast<double>(states.size()));
    require(check.ok(), "slicing sequence fails its verification");
    require(tele_ok == static_cast<int>(states.size()), "telescoping inequalities fail");
}

void cmd_observability(const Context& ctx, const Setup& s) {
    const ModalSystem sys = s.system(ctx.modes(8), ctx.time_set_override());
    const double s0 = ctx.get<double>("s", 0.0);
    const auto rep = estimate_observability_constant(sys, s0, ctx.get<int>("starts", 24), ctx.cfg.seed);
    auto csv = ctx.csv("observability.csv", {"start", "lhs", "rhs", "ratio"});
    for (const auto& r : rep.samples) csv.row({static_cast<long long>(r.id), r.lhs, r.rhs, r.ratio});
    csv.close();
    const ModeState zmax{rep.maximizer, sys.horizon()};
    const auto uc = check_unique_continuation(zmax, sys, s.g0, s0, 1e-12, 1e12);
    ctx.record.set("s", s0);
    ctx.record.set("constant_estimate", rep.constant_estimate);
    ctx.record.set("regime_holds", rep.regime == ObservabilityRegime::holds ? 1.0 : 0.0);
    ctx.record.set("observation_sup", uc.observation_sup);
    ctx.record.set("observation_l1", uc.observation_l1);
    ctx.record.set("unique_continuation", uc.implication_holds ? 1.0 : 0.0);
    ctx.record.note("regime", rep.regime == ObservabilityRegime::holds ? "holds" : "fails");
}

Schedule schedule_from(const Context& ctx) {
    Schedule sc;
    sc.initial_window = ctx.get<double>("initial_window", 0.0);
    sc.growth = ctx.get<double>("growth", 4.0);
    sc.control_fraction = ctx.get<double>("control_fraction", 0.5);
    sc.max_stages = ctx.get<int>("max_stages", 12);
    sc.tolerance = ctx.get<double>("tolerance", ctx.cfg.tolerance);
    return sc;
}

void cmd_null_control(const Context& ctx, const Setup& s) {
    const ModalSystem sys = s.system(ctx.modes(16), ctx.time_set_override());
    std::mt19937_64 rng = command_rng(ctx.cfg.seed, "null-control");
    const ModeState y0{random_unit(sys.modes(), rng), 0.0};
    ControlPlan plan = lebeau_robbiano_plan(y0, sys, schedule_from(ctx));

    const BrownianBundle bundle(ctx.cfg.seed, ctx.cfg.n_steps, ctx.paths(), sys.horizon());
    const auto fwd = solve_forward(y0, plan.signal, sys, bundle);
    RunningStats terminal;
    for (int p = 0; p < fwd.terminal.paths(); ++p) terminal.add(fwd.terminal.coeffs.col(p).squaredNorm());
    plan.achieved_terminal_norm = terminal.mean();

    auto csv = ctx.csv("plan.csv", {"stage", "begin", "control_end", "end", "window", "modes", "sigma_min",
                                    "window_residual", "high_before", "high_after", "decay_bound"});
    bool decay_ok = true;
    Chart chart{"High-mode norm per stage", "stage end", "|reduced high modes|", true,
                {{"after decay", {}, {}}, {"bound", {}, {}}}};
    for (std::size_t k = 0; k < plan.stages.size(); ++k) {
        const auto& st = plan.stages[k];
        decay_ok = decay_ok && st.decay_holds();
        csv.row({static_cast<long long>(k + 1), st.begin, st.control_end, st.end, st.window,
                 static_cast<long long>(st.modes.size()), st.sigma_min, st.window_residual, st.high_before,
                 st.high_after, st.decay_bound});
        chart.series[0].x.push_back(st.end);
        chart.series[0].y.push_back(st.high_after);
        chart.series[1].x.push_back(st.end);
        chart.series[1].y.push_back(st.decay_bound);
    }
    csv.close();
    ctx.svg("plan.svg", chart);

    const int partial = std::min(ctx.get<int>("partial_modes", 8), sys.modes());
    std::vector<double> sqrt_r, cost_values;
    double cost_slope = std::numeric_limits<double>::quiet_NaN();
    if (partial >= 2) {
        const auto sweep = cost_sweep(sys, 0.0, sys.horizon(), partial);
        auto costs = ctx.csv("costs.csv", {"modes", "r", "sqrt_r", "cost", "sigma_min"});
        for (std::size_t k = 0; k < sweep.windows.size(); ++k) {
            costs.row({static_cast<long long>(sweep.mode_counts[k]), sweep.windows[k], std::sqrt(sweep.windows[k]),
                       sweep.costs[k], sweep.sigma_min[k]});
            sqrt_r.push_back(std::sqrt(sweep.windows[k]));
            cost_values.push_back(sweep.costs[k]);
        }
        costs.close();
        ctx.svg("costs.svg", {"Partial null control cost", "sqrt(r)", "worst-case cost", true, {{"cost", sqrt_r, cost_values}}});
        cost_slope = sweep.log_cost_fit.slope;
    }

    // Reduced control field v(t, x) on a time grid, nodes inside G0.
    auto grid = ctx.csv("control_grid.csv", {"t", "x", "v"});
    constexpr int samples = 64;
    for (int i = 0; i <= samples; ++i) {
        const double t = sys.horizon() * i / samples;
        const NodalField v = sys.basis().to_nodal(plan.signal.shape(t, sys));
        for (Eigen::Index n = 0; n < v.size(); ++n)
            if (s.g0.indicator()[static_cast<std::size_t>(n)]) grid.row({t, s.domain.nodes()[n], v[n]});
    }
    grid.close();

    const double y2 = y0.coeffs.squaredNorm();
    ctx.record.set("stages", static_cast<double>(plan.stages.size()));
    ctx.record.set("predicted_cost", plan.predicted_cost);
    ctx.record.set("control_linf_norm", plan.signal.linf_norm(sys));
    ctx.record.set("predicted_terminal_ratio", plan.predicted_terminal / y2);
    ctx.record.set("achieved_terminal_ratio", plan.achieved_terminal_norm / y2);
    ctx.record.set("achieved_terminal_se", terminal.standard_error() / y2);
    ctx.record.set("decay_checks_ok", decay_ok ? 1.0 : 0.0);
    ctx.record.set("cost_fit_slope", cost_slope);
    require(decay_ok, "free-decay bound violated in a stage");
}

void cmd_approx_control(const Context& ctx, const Setup& s) {
    const ModalSystem sys = s.system(ctx.modes(8), ctx.time_set_override());
    std::mt19937_64 rng = command_rng(ctx.cfg.seed, "approx-control");
    const ModeState y0{random_unit(sys.modes(), rng), 0.0};
    ModeState target{Eigen::VectorXd::Zero(sys.modes()), sys.horizon()};
    if (ctx.get<std::string>("target", "zero") == "random") target.coeffs = 0.1 * random_unit(sys.modes(), rng);
    const double eps = ctx.get<double>("eps", 1e-3);
    const auto ac = approximate_control(y0, target, eps, sys);
    const double simulated = (evolve_reduced(y0, ac.signal, sys, sys.horizon()).coeffs - target.coeffs).norm();

    auto csv = ctx.csv("gap_history.csv", {"iteration", "gap"});
    std::vector<double> it, gaps;
    for (std::size_t k = 0; k < ac.gap_history.size(); ++k) {
        csv.row({static_cast<long long>(k), ac.gap_history[k]});
        it.push_back(static_cast<double>(k));
        gaps.push_back(ac.gap_history[k]);
    }
    csv.close();
    ctx.svg("gap_history.svg", {"Approximate control gap", "iteration", "terminal gap", true, {{"gap", it, gaps}}});
    ctx.record.set("eps", eps);
    ctx.record.set("gap", ac.gap);
    ctx.record.set("simulated_gap", simulated);
    ctx.record.set("nu", ac.nu);
    ctx.record.set("cost", ac.cost);
    ctx.record.set("noise_moment", ac.noise_moment);
    ctx.record.set("stochastic_distance", ac.stochastic_distance);
    ctx.record.set("iterations", static_cast<double>(ac.gap_history.size() - 1));
    ctx.record.set("sigma_min", ac.sigma_min);
    require(simulated <= eps, "simulated terminal gap exceeds eps");
}

void cmd_counterexample(const Context& ctx, const Setup& s) {
    const ModalSystem sys = s.system(ctx.modes(1), ctx.time_set_override());
    const double s0 = ctx.get<double>("s0", 0.4);
    const int n_steps = ctx.get<int>("n_steps", ctx.cfg.n_steps);
    const BrownianBundle bundle(ctx.cfg.seed, n_steps, ctx.paths(), sys.horizon());
    const auto w = build_counterexample(sys, s0, bundle, 4);

    std::vector<std::string> header{"t"};
    for (int p = 0; p < w.sample_paths.rows(); ++p) header.push_back("phi_path" + std::to_string(p));
    auto csv = ctx.csv("counterexample_paths.csv", header);
    Chart chart{"Counterexample adjoint paths", "t", "phi_1(t)", false, {}};
    for (int p = 0; p < w.sample_paths.rows(); ++p) chart.series.push_back({"path " + std::to_string(p), {}, {}});
    for (std::size_t k = 0; k < w.times.size(); ++k) {
        std::vector<CsvCell> row{w.times[k]};
        for (int p = 0; p < w.sample_paths.rows(); ++p) {
            row.emplace_back(w.sample_paths(p, static_cast<Eigen::Index>(k)));
            chart.series[static_cast<std::size_t>(p)].x.push_back(w.times[k]);
            chart.series[static_cast<std::size_t>(p)].y.push_back(w.sample_paths(p, static_cast<Eigen::Index>(k)));
        }
        csv.row(row);
    }
    csv.close();
    ctx.svg("counterexample_paths.svg", chart);

    const double z = (w.mc_second_moment - w.terminal_second_moment) / w.mc_standard_error;
    ctx.record.set("s0", s0);
    ctx.record.set("measure_after_s0", sys.time_set().intervals().measure_within(s0, sys.horizon()));
    ctx.record.set("observation_norm", w.observation_norm);
    ctx.record.set("initial_norm", w.initial_norm);
    ctx.record.set("terminal_mean", w.mean);
    ctx.record.set("terminal_variance", w.variance);
    ctx.record.set("terminal_second_moment", w.terminal_second_moment);
    ctx.record.set("mc_second_moment", w.mc_second_moment);
    ctx.record.set("mc_standard_error", w.mc_standard_error);
    ctx.record.set("mc_z_score", z);
    ctx.record.set("observability_ratio", w.observation_norm == 0.0 ? std::numeric_limits<double>::infinity()
                                                                    : w.terminal_second_moment / w.observation_norm);
    ctx.record.set("paths", static_cast<double>(w.paths));
    require(w.observation_norm == 0.0 && w.initial_norm == 0.0, "counterexample observation is not zero");
    require(w.terminal_second_moment > 0.0, "counterexample terminal moment is not positive");
}

void cmd_duality(const Context& ctx, const Setup& s) {
    const ModalSystem sys = s.system(ctx.modes(8), ctx.time_set_override());
    std::mt19937_64 rng = command_rng(ctx.cfg.seed, "duality-check");
    const ModeState y0{random_unit(sys.modes(), rng), 0.0};
    const int window = std::min(4, sys.modes());
    std::vector<int> modes(static_cast<std::size_t>(window));
    for (int j = 0; j < window; ++j) modes[static_cast<std::size_t>(j)] = j;
    const auto pnc = partial_null_control(y0, modes, 0.0, sys.horizon(), sys);
    const ModeState zT{random_unit(sys.modes(), rng), sys.horizon()};
    const auto exact = check_duality(y0, pnc.signal, zT, sys);

    const ChaosTerminal chaos{{random_unit(sys.modes(), rng), 0.5 * random_unit(sys.modes(), rng)}};
    const BrownianBundle bundle(ctx.cfg.seed, ctx.get<int>("n_steps", ctx.cfg.n_steps), ctx.paths(), sys.horizon());
    const auto mc = check_duality(y0, pnc.signal, chaos, sys, bundle);

    auto csv = ctx.csv("duality.csv", {"regime", "lhs", "rhs", "residual", "difference_mean", "difference_se", "paths"});
    csv.row({std::string("exact"), exact.lhs, exact.rhs, exact.residual, exact.difference_mean, exact.difference_se,
             static_cast<long long>(exact.paths)});
    csv.row({std::string("monte_carlo"), mc.lhs, mc.rhs, mc.residual, mc.difference_mean, mc.difference_se,
             static_cast<long long>(mc.paths)});
    csv.close();
    ctx.record.set("exact_lhs", exact.lhs);
    ctx.record.set("exact_rhs", exact.rhs);
    ctx.record.set("exact_residual", exact.residual);
    ctx.record.set("mc_lhs", mc.lhs);
    ctx.record.set("mc_rhs", mc.rhs);
    ctx.record.set("mc_difference_mean", mc.difference_mean);
    ctx.record.set("mc_difference_se", mc.difference_se);
    ctx.record.set("mc_standard_errors", mc.difference_se > 0 ? std::abs(mc.difference_mean) / mc.difference_se : 0.0);
    ctx.record.set("paths", static_cast<double>(mc.paths));
    require(exact.residual <= 1e-10, "exact duality residual exceeds 1e-10");
}

using Handler = void (*)(const Context&, const Setup&);

const std::map<std::string, Handler>& handlers() {
    static const std::map<std::string, Handler> h{
        {"spectrum", cmd_spectrum},
        {"spectral-inequality", cmd_spectral_inequality},
        {"interpolation", cmd_interpolation},
        {"slicing", cmd_slicing},
        {"observability", cmd_observability},
        {"null-control", cmd_null_control},
        {"approx-control", cmd_approx_control},
        {"counterexample", cmd_counterexample},
        {"duality-check", cmd_duality},
    };
    return h;
}

nlohmann::json scalar_json(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    return v;
}

}  // namespace

void RunRecord::set(const std::string& name, double value) {
    for (auto& kv : scalars)
        if (kv.first == name) {
            kv.second = value;
            return;
        }
    scalars.emplace_back(name, value);
}

void RunRecord::note(const std::string& name, const std::string& value) { notes.emplace_back(name, value); }

double RunRecord::scalar(const std::string& name) const {
    for (const auto& kv : scalars)
        if (kv.first == name) return kv.second;
    throw ArgumentError("run record has no scalar '" + name + "'");
}

nlohmann::ordered_json RunRecord::to_json() const {
    nlohmann::ordered_json sc = nlohmann::ordered_json::object();
    for (const auto& [k, v] : scalars) sc[k] = scalar_json(v);
    nlohmann::ordered_json nt = nlohmann::ordered_json::object();
    for (const auto& [k, v] : notes) nt[k] = v;
    nlohmann::ordered_json j;
    j["command"] = command;
    j["config_digest"] = config_digest;
    j["seed"] = seed;
    j["wall_time_seconds"] = wall_time;
    j["outputs"] = outputs;
    j["scalars"] = sc;
    j["notes"] = nt;
    return j;
}

const std::vector<std::string>& command_names() {
    static const std::vector<std::string> names = [] {
        std::vector<std::string> v;
        for (const auto& kv : handlers()) v.push_back(kv.first);
        return v;
    }();
    return names;
}

RunRecord run(const std::string& command, const ExperimentConfig& cfg, const std::string& out_dir) {
    const auto it = handlers().find(command);
    if (it == handlers().end()) {
        std::string list;
        for (const auto& n : command_names()) list += (list.empty() ? "" : ", ") + n;
        throw ConfigError("unknown command '" + command + "' (expected one of: " + list + ")");
    }
    std::error_code ec;
    fs::create_directories(out_dir, ec);
    if (ec) throw IoError("cannot create output directory '" + out_dir + "': " + ec.message());

    RunRecord record;
    record.command = command;
    record.config_digest = cfg.digest();
    record.seed = cfg.seed;
    const auto start = std::chrono::steady_clock::now();
    const Context ctx{cfg, cfg.command(command), fs::path(out_dir), record.config_digest, record};
    try {
        const Setup setup = build_setup(cfg);
        it->second(ctx, setup);
    } catch (const Error& e) {
        throw Error(e.kind(), command + ": " + e.what());
    }
    record.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    record.outputs.push_back("run_record.json");

    std::ofstream out(fs::path(out_dir) / "run_record.json");
    if (!out) throw IoError("cannot write run_record.json in '" + out_dir + "'");
    // The record itself names the digest, so every output carries it.
    out << record.to_json().dump(2) << '\n';
    return record;
}

int exit_code(ErrorKind kind) noexcept {
    switch (kind) {
        case ErrorKind::configuration:
        case ErrorKind::argument:
        case ErrorKind::dimension: return 2;
        case ErrorKind::numeric: return 3;
        case ErrorKind::assertion: return 4;
        case ErrorKind::measure_condition:
        case ErrorKind::unsupported: return 5;
        case ErrorKind::io:
        case ErrorKind::internal: return 1;
    }
    return 1;
}

}  // namespace wentzell::harness
