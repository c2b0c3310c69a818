#include "core/control.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "core/errors.hpp"

namespace wentzell {

namespace {

double symmetric_min_eigenvalue(const Eigen::MatrixXd& m, double* max_out = nullptr) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m, Eigen::EigenvaluesOnly);
    if (es.info() != Eigen::Success) throw NumericError("symmetric eigensolver failed on a Gramian");
    if (max_out) *max_out = es.eigenvalues().maxCoeff();
    return es.eigenvalues().minCoeff();
}

/// Earliest t with m(E ∩ (0, t)) = mass.
double time_at_mass(const TimeSet& e, double mass) {
    double acc = 0.0;
    for (const auto& piece : e.intervals().intervals()) {
        if (acc + piece.length() >= mass) return piece.lo + std::max(0.0, mass - acc);
        acc += piece.length();
    }
    return e.horizon();
}

Eigen::VectorXd select(const Eigen::VectorXd& v, const std::vector<int>& idx) {
    Eigen::VectorXd out(static_cast<Eigen::Index>(idx.size()));
    for (std::size_t k = 0; k < idx.size(); ++k) out[static_cast<Eigen::Index>(k)] = v[idx[k]];
    return out;
}

double complement_norm(const Eigen::VectorXd& y, const ModalSystem& sys, double r) {
    double s = 0.0;
    for (int j = 0; j < sys.modes(); ++j)
        if (sys.lambda(j) > r) s += y[j] * y[j];
    return std::sqrt(s);
}

}  // namespace

HumGramian build_gramian(const std::vector<int>& modes, double t_a, double t_b, const ModalSystem& sys,
                         double bsq_weight) {
    if (modes.empty()) throw ArgumentError("Gramian window is empty");
    if (!(t_a >= 0.0 && t_b > t_a && t_b <= sys.horizon())) throw ArgumentError("Gramian interval outside (0, T)");
    for (int j : modes)
        if (j < 0 || j >= sys.modes()) throw DimensionError("Gramian mode index out of range");
    HumGramian h;
    h.modes = modes;
    h.t_a = t_a;
    h.t_b = t_b;
    const auto n = static_cast<Eigen::Index>(modes.size());
    h.matrix = Eigen::MatrixXd::Zero(n, n);
    const auto& e = sys.time_set().intervals();
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j <= i; ++j) {
            const int mi = modes[static_cast<std::size_t>(i)];
            const int mj = modes[static_cast<std::size_t>(j)];
            const double g = sys.gram()(mi, mj);
            const double v = g == 0.0 ? 0.0
                                      : g * integrate_exponential(sys.coefficients(), e, t_a, t_b,
                                                                  {sys.lambda(mi) + sys.lambda(mj), 2.0, bsq_weight});
            h.matrix(i, j) = v;
            h.matrix(j, i) = v;
        }
    h.sigma_min = std::max(0.0, symmetric_min_eigenvalue(h.matrix, &h.sigma_max));
    return h;
}

std::vector<int> window_modes(const ModalSystem& sys, double r) {
    std::vector<int> out;
    for (int j = 0; j < sys.modes(); ++j)
        if (sys.lambda(j) <= r) out.push_back(j);
    if (out.empty()) throw ArgumentError("spectral window contains no mode");
    return out;
}

PartialNullControl partial_null_control(const ModeState& y, const std::vector<int>& modes, double t_a, double t_b,
                                        const ModalSystem& sys) {
    if (y.coeffs.size() != sys.modes()) throw DimensionError("state mode count differs from the system");
    if (y.time > t_a) throw ArgumentError("partial null control starts before the state time");
    PartialNullControl out{ControlSignal(sys.modes()), build_gramian(modes, t_a, t_b, sys), {}, {}};
    if (out.gramian.sigma_min < kGramianFloor) {
        std::ostringstream os;
        os << "ill-posed control window: sigma_min(Lambda)=" << out.gramian.sigma_min << " < " << kGramianFloor
           << " for " << modes.size() << " modes on (" << t_a << ", " << t_b
           << "); enlarge G0 or E, or use a smaller window r";
        throw NumericError(os.str());
    }
    out.free_terminal = sys.propagate(y.coeffs, y.time, t_b);
    const Eigen::VectorXd f = select(out.free_terminal, modes);
    out.zeta = -out.gramian.matrix.ldlt().solve(f);
    if (out.zeta.cwiseAbs().maxCoeff() > 0.0) out.signal.add_stage({t_a, t_b, modes, out.zeta});
    return out;
}

double worst_case_cost(const std::vector<int>& modes, double t_a, double t_b, const ModalSystem& sys) {
    const HumGramian lam = build_gramian(modes, t_a, t_b, sys);
    if (lam.sigma_min < kGramianFloor) throw NumericError("ill-posed control window in cost evaluation");
    const HumGramian lam_b = build_gramian(modes, t_a, t_b, sys, 1.0);
    Eigen::VectorXd d(lam.size());
    for (int k = 0; k < lam.size(); ++k) d[k] = sys.propagator(modes[static_cast<std::size_t>(k)], 0.0, t_b);
    const Eigen::MatrixXd x = lam.matrix.ldlt().solve(Eigen::MatrixXd(d.asDiagonal()));
    Eigen::MatrixXd cost = x.transpose() * lam_b.matrix * x;
    cost = 0.5 * (cost + cost.transpose());
    double top = 0.0;
    symmetric_min_eigenvalue(cost, &top);
    return top;
}

CostSweep cost_sweep(const ModalSystem& sys, double t_a, double t_b, int max_modes) {
    if (max_modes < 2 || max_modes > sys.modes()) throw ArgumentError("cost sweep needs 2..modes windows");
    CostSweep s;
    std::vector<double> x, y;
    for (int k = 1; k <= max_modes; ++k) {
        const double r = sys.lambda(k - 1);
        const auto modes = window_modes(sys, r);
        s.windows.push_back(r);
        s.mode_counts.push_back(static_cast<int>(modes.size()));
        s.sigma_min.push_back(build_gramian(modes, t_a, t_b, sys).sigma_min);
        s.costs.push_back(worst_case_cost(modes, t_a, t_b, sys));
        x.push_back(std::sqrt(r));
        y.push_back(std::log(s.costs.back()));
    }
    s.log_cost_fit = fit_line(x, y);
    return s;
}

PlanLayout plan_layout(const ModalSystem& sys, const Schedule& schedule, int stages) {
    if (stages < 1) throw ArgumentError("a plan needs at least one stage");
    if (!(schedule.growth > 1.0)) throw ConfigError("schedule growth must exceed 1");
    if (!(schedule.control_fraction > 0.0 && schedule.control_fraction <= 1.0))
        throw ConfigError("schedule control_fraction must lie in (0, 1]");
    const TimeSet& e = sys.time_set();
    const double mu = e.measure();
    if (!(mu > 0.0)) throw MeasureConditionError("E has zero measure: no stage can carry a control");
    double r = schedule.initial_window;
    if (r <= 0.0) r = sys.modes() > 1 ? sys.lambda(1) : std::max(1.0, sys.lambda(0));

    PlanLayout layout{schedule, {}};
    double cum = 0.0;
    double begin = 0.0;
    for (int k = 0; k < stages; ++k) {
        const bool last = k + 1 == stages;
        const double mass = last ? mu - cum : mu * std::ldexp(1.0, -(k + 1));
        PlanStage st;
        st.begin = begin;
        st.control_end = time_at_mass(e, cum + schedule.control_fraction * mass);
        st.end = last ? e.horizon() : time_at_mass(e, cum + mass);
        st.window = r;
        st.modes = window_modes(sys, r);
        if (!(st.control_end > st.begin))
            throw ConfigError("schedule leaves a stage without control time; use fewer stages");
        st.sigma_min = build_gramian(st.modes, st.begin, st.control_end, sys).sigma_min;
        layout.stages.push_back(std::move(st));
        cum += mass;
        begin = layout.stages.back().end;
        r *= schedule.growth;
    }
    return layout;
}

ControlPlan realize_plan(const PlanLayout& layout, const ModeState& y0, const ModalSystem& sys) {
    if (y0.coeffs.size() != sys.modes()) throw DimensionError("initial state mode count differs from the system");
    if (y0.time != 0.0) throw ArgumentError("plans start at t = 0");
    ControlPlan plan;
    plan.schedule = layout.schedule;
    plan.signal = ControlSignal(sys.modes());
    plan.initial_norm = y0.norm();
    const double a_sup = sys.coefficients().a_sup();

    ModeState y = y0;
    for (PlanStage st : layout.stages) {
        const auto pnc = partial_null_control(y, st.modes, st.begin, st.control_end, sys);
        st.zeta = pnc.zeta;
        for (const auto& s : pnc.signal.stages()) plan.signal.add_stage(s);
        y = evolve_reduced(y, pnc.signal, sys, st.control_end);
        st.window_residual = select(y.coeffs, st.modes).norm();
        st.high_before = complement_norm(y.coeffs, sys, st.window);
        y = ModeState{sys.propagate(y.coeffs, st.control_end, st.end), st.end};
        st.high_after = complement_norm(y.coeffs, sys, st.window);
        st.decay_bound = std::exp((-st.window + a_sup) * (st.end - st.control_end)) * st.high_before;
        plan.stages.push_back(std::move(st));
    }
    plan.reduced_terminal = y;
    plan.predicted_terminal = y.coeffs.squaredNorm() * noise_second_moment(sys.coefficients(), sys.horizon());
    plan.predicted_cost = plan.signal.l2_cost(sys);
    return plan;
}

ControlPlan lebeau_robbiano_plan(const ModeState& y0, const ModalSystem& sys, const Schedule& schedule) {
    if (y0.coeffs.size() != sys.modes()) throw DimensionError("initial state mode count differs from the system");
    const double norm = y0.norm();
    double target = 0.0;
    for (int j = 0; j < sys.modes(); ++j)
        if (std::abs(y0.coeffs[j]) > 1e-14 * norm) target = std::max(target, sys.lambda(j));

    double r = schedule.initial_window;
    if (r <= 0.0) r = sys.modes() > 1 ? sys.lambda(1) : std::max(1.0, sys.lambda(0));
    int k_min = 1;
    while (r < target && k_min < schedule.max_stages) {
        r *= schedule.growth;
        ++k_min;
    }
    std::ostringstream diag;
    for (int k = k_min; k <= schedule.max_stages; ++k) {
        ControlPlan plan = realize_plan(plan_layout(sys, schedule, k), y0, sys);
        if (plan.predicted_terminal <= schedule.tolerance * norm * norm) return plan;
        diag << " K=" << k << ": E|y(T)|^2/|y0|^2=" << plan.predicted_terminal / (norm * norm) << ";";
    }
    std::ostringstream os;
    os << "Lebeau-Robbiano schedule exhausted (0, T) before reaching tolerance " << schedule.tolerance
       << " (largest active eigenvalue " << target << ", max_stages " << schedule.max_stages << "):" << diag.str();
    throw ConfigError(os.str());
}

ControlBound control_bound(const PlanLayout& layout, const ModalSystem& sys) {
    ControlBound b;
    for (int j = 0; j < sys.modes(); ++j) {
        ModeState e{Eigen::VectorXd::Unit(sys.modes(), j), 0.0};
        const ControlPlan plan = realize_plan(layout, e, sys);
        const double linf = plan.signal.linf_norm(sys);
        b.linf += linf * linf;
        b.l2 += plan.predicted_cost;
    }
    b.linf = std::sqrt(b.linf);
    b.l2 = std::sqrt(b.l2);
    return b;
}

ApproximateControl approximate_control(const ModeState& y0, const ModeState& target, double eps,
                                       const ModalSystem& sys, int max_iterations) {
    if (!sys.time_set().satisfies_measure_condition())
        throw MeasureConditionError(
            "E violates m((s, T) ∩ E) > 0 for some s < T; approximate control fails there, see the "
            "counterexample command");
    if (y0.coeffs.size() != sys.modes() || target.coeffs.size() != sys.modes())
        throw DimensionError("state mode count differs from the system");
    if (!(eps > 0.0)) throw ArgumentError("approximate control needs eps > 0");
    const double t0 = y0.time;
    const double T = sys.horizon();

    ApproximateControl out;
    out.signal = ControlSignal(sys.modes());
    out.noise_moment = noise_second_moment(sys.coefficients(), T);
    out.free_gap = sys.propagate(y0.coeffs, t0, T) - target.coeffs;
    out.zeta = Eigen::VectorXd::Zero(sys.modes());
    const double g_norm = out.free_gap.norm();
    out.gap_history.push_back(g_norm);
    out.gap = g_norm;

    std::vector<int> all(static_cast<std::size_t>(sys.modes()));
    for (int j = 0; j < sys.modes(); ++j) all[static_cast<std::size_t>(j)] = j;
    const HumGramian lam = build_gramian(all, t0, T, sys);
    out.sigma_min = lam.sigma_min;
    if (g_norm <= eps) {
        out.stochastic_distance = out.gap * std::sqrt(out.noise_moment);
        return out;
    }

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(lam.matrix);
    if (es.info() != Eigen::Success) throw NumericError("symmetric eigensolver failed on the Gramian");
    const Eigen::VectorXd mu = es.eigenvalues().cwiseMax(0.0);
    const Eigen::VectorXd gt = es.eigenvectors().transpose() * out.free_gap;
    const double goal = std::pow(eps * (1.0 - 1e-9), 2);
    const double accept = eps * eps * (1.0 - 1e-12);

    double unreachable = 0.0;
    for (Eigen::Index i = 0; i < mu.size(); ++i)
        if (mu[i] == 0.0) unreachable += gt[i] * gt[i];
    if (unreachable > goal) throw NumericError("the Gramian kernel holds more than eps of the free gap");

    auto q = [&](double nu) { return (gt.array() / (1.0 + nu * mu.array())).square().sum(); };
    auto dq = [&](double nu) {
        return -2.0 * (gt.array().square() * mu.array() / (1.0 + nu * mu.array()).cube()).sum();
    };
    double nu = 0.0;
    double qn = q(nu);
    int it = 0;
    // q is convex and decreasing, so Newton from the left never overshoots the root.
    while (qn > accept) {
        if (++it > max_iterations) throw NumericError("approximate control: Newton iteration did not converge");
        nu -= (qn - goal) / dq(nu);
        qn = q(nu);
        out.gap_history.push_back(std::sqrt(qn));
    }
    out.nu = nu;
    const Eigen::VectorXd zt = -nu * (gt.array() / (1.0 + nu * mu.array())).matrix();
    out.zeta = es.eigenvectors() * zt;
    out.gap = std::sqrt(qn);
    out.signal.add_stage({t0, T, all, out.zeta});
    out.cost = out.signal.l2_cost(sys);
    out.stochastic_distance = out.gap * std::sqrt(out.noise_moment);
    return out;
}

CounterexampleWitness build_counterexample(const ModalSystem& sys, double s0, const BrownianBundle& bundle,
                                           int kept_paths) {
    const double T = sys.horizon();
    if (std::abs(bundle.horizon() - T) > 1e-12 * T) throw ConfigError("Brownian bundle horizon differs from T");
    if (!(s0 >= 0.0 && s0 < T)) throw ArgumentError("counterexample needs 0 <= s0 < T");
    const double mass = sys.time_set().intervals().measure_within(s0, T);
    if (mass > 0.0) {
        std::ostringstream os;
        os << "counterexample needs m((s0, T) ∩ E) = 0, got " << mass << " for s0 = " << s0;
        throw ArgumentError(os.str());
    }
    const auto& c = sys.coefficients();
    const double dt = bundle.dt();
    c.check_aligned(dt);
    const int k0 = static_cast<int>(std::lround(s0 / dt));
    if (std::abs(k0 * dt - s0) > 1e-12 * T) throw ArgumentError("s0 is not on the time grid");
    const int n = bundle.n_steps();
    const double lambda1 = sys.lambda(0);

    CounterexampleWitness w;
    w.s0 = s0;
    w.horizon = T;
    w.paths = bundle.paths();
    for (int k = k0; k <= n; ++k) w.times.push_back(bundle.time(k));
    kept_paths = std::clamp(kept_paths, 0, bundle.paths());
    w.sample_paths = Eigen::MatrixXd::Zero(kept_paths, static_cast<Eigen::Index>(w.times.size()));
    w.terminal.resize(bundle.paths());

    // Per-step factors: exact integrating factor and drift, trapezoidal noise weight.
    std::vector<double> growth(static_cast<std::size_t>(n)), noise_w(growth.size()), drift(growth.size());
    for (int k = k0; k < n; ++k) {
        const double mid = bundle.time(k) + 0.5 * dt;
        const double x = (lambda1 - c.a()(mid)) * dt;
        const double ex = std::exp(x);
        const auto kk = static_cast<std::size_t>(k);
        growth[kk] = ex;
        noise_w[kk] = 0.5 * (1.0 + ex);
        drift[kk] = -c.b()(mid) * dt * ex * relative_expm1(x);
    }
    const double psi_g0 = std::sqrt(std::max(0.0, sys.gram()(0, 0)));
    const auto& e = sys.time_set();

    RunningStats second;
    double obs = 0.0;
    std::vector<double> inc(static_cast<std::size_t>(n));
    for (int p = 0; p < bundle.paths(); ++p) {
        bundle.fill_increments(p, inc);
        double phi = 0.0;
        w.initial_norm = std::max(w.initial_norm, std::abs(phi));
        if (p < kept_paths) w.sample_paths(p, 0) = phi;
        for (int k = k0; k < n; ++k) {
            const auto kk = static_cast<std::size_t>(k);
            if (e.contains(bundle.time(k) + 0.5 * dt)) obs += dt * std::abs(phi) * psi_g0;
            phi = growth[kk] * phi + noise_w[kk] * inc[kk] + drift[kk];
            if (p < kept_paths) w.sample_paths(p, k - k0 + 1) = phi;
        }
        w.terminal[p] = phi;
        second.add(phi * phi);
    }
    w.observation_norm = obs / bundle.paths();
    w.mc_second_moment = second.mean();
    w.mc_standard_error = second.standard_error();

    const auto& b = c.b();
    for (std::size_t i = 0; i < b.values().size(); ++i) {
        const double lo = std::max(s0, b.breaks()[i]);
        const double hi = std::min(T, b.breaks()[i + 1]);
        if (!(hi > lo) || b.values()[i] == 0.0) continue;
        w.mean -= b.values()[i] * integrate_exponential(c, IntervalSet::single(lo, hi), s0, T, {-lambda1, -1.0, 0.0});
    }
    w.variance = integrate_exponential(c, s0, T, {-2.0 * lambda1, -2.0, 0.0});
    w.terminal_second_moment = w.mean * w.mean + w.variance;
    return w;
}

}  // namespace wentzell
