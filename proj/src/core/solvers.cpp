#include "core/solvers.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <sstream>

#include "core/errors.hpp"
#include "core/stats.hpp"

namespace wentzell {

namespace {

void check_modes(const Eigen::VectorXd& v, const ModalSystem& sys, const char* what) {
    if (v.size() != sys.modes()) {
        std::ostringstream os;
        os << what << " has " << v.size() << " modes, system has " << sys.modes();
        throw DimensionError(os.str());
    }
}

void check_bundle(const ModalSystem& sys, const BrownianBundle& bundle) {
    if (std::abs(bundle.horizon() - sys.horizon()) > 1e-12 * sys.horizon())
        throw ConfigError("Brownian bundle horizon differs from T");
    sys.coefficients().check_aligned(bundle.dt());
}

double stage_weight(const ModalSystem& sys, const ExponentialStage& s, int k, double t) {
    return sys.propagator(s.modes[static_cast<std::size_t>(k)], t, s.end);
}

ExponentProfile pair_profile(double mu, double bsq_weight = 0.0) { return {mu, 2.0, bsq_weight}; }

}  // namespace

Eigen::VectorXd GriddedProfile::at(double t) const {
    if (shape.cols() == 0) throw ArgumentError("empty gridded profile");
    if (steps() == 0) return shape.col(0);
    const double x = std::clamp((t - t0) / dt, 0.0, static_cast<double>(steps()));
    const int i = std::min(static_cast<int>(std::floor(x)), steps() - 1);
    const double f = x - i;
    return (1.0 - f) * shape.col(i) + f * shape.col(i + 1);
}

bool ControlSignal::is_zero() const {
    for (const auto& s : stages_)
        if (s.zeta.size() > 0 && s.zeta.cwiseAbs().maxCoeff() > 0.0) return false;
    return !profile_ || profile_->shape.cwiseAbs().maxCoeff() == 0.0;
}

void ControlSignal::add_stage(ExponentialStage stage) {
    if (!(stage.end > stage.begin)) throw ArgumentError("control stage needs begin < end");
    if (static_cast<Eigen::Index>(stage.modes.size()) != stage.zeta.size())
        throw DimensionError("stage mode list and coefficient vector differ in length");
    for (int k : stage.modes)
        if (k < 0 || k >= modes_) throw DimensionError("stage mode index out of range");
    stages_.push_back(std::move(stage));
}

void ControlSignal::set_profile(GriddedProfile profile) {
    if (profile.shape.rows() != modes_) throw DimensionError("profile mode count differs from the signal");
    if (profile.shape.cols() < 1 || (profile.shape.cols() > 1 && !(profile.dt > 0.0)))
        throw ArgumentError("profile needs samples and a positive step");
    profile_ = std::move(profile);
}

Eigen::VectorXd ControlSignal::raw_shape(double t, const ModalSystem& sys) const {
    Eigen::VectorXd c = Eigen::VectorXd::Zero(modes_);
    for (const auto& s : stages_) {
        if (t < s.begin || t > s.end) continue;
        for (std::size_t k = 0; k < s.modes.size(); ++k)
            c[s.modes[k]] += s.zeta[static_cast<Eigen::Index>(k)] * stage_weight(sys, s, static_cast<int>(k), t);
    }
    if (profile_ && t >= profile_->t0 && t <= profile_->t1()) c += profile_->at(t);
    return c;
}

Eigen::VectorXd ControlSignal::shape(double t, const ModalSystem& sys) const {
    if (!sys.time_set().contains(t)) return Eigen::VectorXd::Zero(modes_);
    return raw_shape(t, sys);
}

std::vector<StepPiece> ControlSignal::step_pieces(double t0, double t1, const ModalSystem& sys) const {
    std::vector<StepPiece> out;
    const auto& e = sys.time_set().intervals();
    for (const auto& s : stages_) {
        const double lo = std::max(t0, s.begin);
        const double hi = std::min(t1, s.end);
        if (!(hi > lo)) continue;
        const double w = e.measure_within(lo, hi);
        if (w <= 0.0) continue;
        StepPiece p{w, Eigen::VectorXd::Zero(modes_), Eigen::VectorXd::Zero(modes_)};
        for (std::size_t k = 0; k < s.modes.size(); ++k) {
            const auto z = s.zeta[static_cast<Eigen::Index>(k)];
            p.left[s.modes[k]] += z * stage_weight(sys, s, static_cast<int>(k), t0);
            p.right[s.modes[k]] += z * stage_weight(sys, s, static_cast<int>(k), t1);
        }
        out.push_back(std::move(p));
    }
    if (profile_) {
        const double lo = std::max(t0, profile_->t0);
        const double hi = std::min(t1, profile_->t1());
        if (hi > lo) {
            const double w = e.measure_within(lo, hi);
            if (w > 0.0) out.push_back({w, profile_->at(t0), profile_->at(t1)});
        }
    }
    return out;
}

double ControlSignal::field_norm(double t, const ModalSystem& sys) const {
    const Eigen::VectorXd c = shape(t, sys);
    return std::sqrt(std::max(0.0, c.dot(sys.gram() * c)));
}

double ControlSignal::linf_norm(const ModalSystem& sys) const {
    if (is_zero()) return 0.0;
    std::vector<double> candidates;
    for (const auto& piece : sys.time_set().intervals().intervals()) {
        constexpr int samples = 2048;
        for (int i = 0; i <= samples; ++i) candidates.push_back(piece.lo + piece.length() * i / samples);
        for (const auto& s : stages_)
            for (double t : {s.begin, s.end})
                if (t >= piece.lo && t <= piece.hi) candidates.push_back(t);
    }
    double best = 0.0;
    for (double t : candidates) {
        const Eigen::VectorXd c = raw_shape(t, sys);
        const double v2 = std::max(0.0, c.dot(sys.gram() * c));
        best = std::max(best, std::sqrt(v2 * noise_second_moment(sys.coefficients(), t)));
    }
    return best;
}

double ControlSignal::l2_cost(const ModalSystem& sys) const {
    const auto& c = sys.coefficients();
    const auto& e = sys.time_set().intervals();
    const auto& g = sys.gram();
    if (!profile_) {
        double total = 0.0;
        for (const auto& s1 : stages_)
            for (const auto& s2 : stages_) {
                const double lo = std::max(s1.begin, s2.begin);
                const double hi = std::min(s1.end, s2.end);
                if (!(hi > lo)) continue;
                for (std::size_t k = 0; k < s1.modes.size(); ++k)
                    for (std::size_t l = 0; l < s2.modes.size(); ++l) {
                        const int i = s1.modes[k];
                        const int j = s2.modes[l];
                        if (g(i, j) == 0.0) continue;
                        const double scale = sys.propagator(i, hi, s1.end) * sys.propagator(j, hi, s2.end);
                        const double integral =
                            integrate_exponential(c, e, lo, hi, pair_profile(sys.lambda(i) + sys.lambda(j), 1.0));
                        total += s1.zeta[static_cast<Eigen::Index>(k)] * s2.zeta[static_cast<Eigen::Index>(l)] *
                                 g(i, j) * scale * integral;
                    }
            }
        return total;
    }
    // Trapezoidal rule on the profile grid, refined 8x.
    const int n = profile_->steps() * 8;
    const double dt = (profile_->t1() - profile_->t0) / n;
    double total = 0.0;
    auto f = [&](double t) {
        const Eigen::VectorXd v = raw_shape(t, sys);
        return v.dot(g * v) * noise_second_moment(c, t);
    };
    for (int i = 0; i < n; ++i) {
        const double lo = profile_->t0 + i * dt;
        const double hi = lo + dt;
        const double w = e.measure_within(lo, hi);
        if (w > 0.0) total += 0.5 * w * (f(lo) + f(hi));
    }
    return total;
}

ModeState evolve_reduced(const ModeState& y, const ControlSignal& u, const ModalSystem& sys, double t1) {
    check_modes(y.coeffs, sys, "state");
    if (u.modes() != sys.modes()) throw DimensionError("control signal mode count differs from the system");
    const double t0 = y.time;
    if (t1 < t0) throw ArgumentError("evolve_reduced runs forward in time only");
    ModeState out{sys.propagate(y.coeffs, t0, t1), t1};
    if (t1 == t0) return out;

    const auto& c = sys.coefficients();
    const auto& e = sys.time_set().intervals();
    const auto& g = sys.gram();
    const int m = sys.modes();

    for (const auto& s : u.stages()) {
        const double p = std::max(t0, s.begin);
        const double q = std::min(t1, s.end);
        if (!(q > p) || !(e.measure_within(p, q) > 0.0)) continue;
        std::vector<double> tail(s.modes.size());
        for (std::size_t k = 0; k < s.modes.size(); ++k)
            tail[k] = s.zeta[static_cast<Eigen::Index>(k)] * sys.propagator(s.modes[k], q, s.end);
        for (int j = 0; j < m; ++j) {
            const double head = sys.propagator(j, q, t1);
            double acc = 0.0;
            for (std::size_t k = 0; k < s.modes.size(); ++k) {
                const int i = s.modes[k];
                if (g(j, i) == 0.0 || tail[k] == 0.0) continue;
                acc += g(j, i) * tail[k] *
                       integrate_exponential(c, e, p, q, pair_profile(sys.lambda(j) + sys.lambda(i)));
            }
            out.coeffs[j] += head * acc;
        }
    }

    if (const auto& prof = u.profile()) {
        const int n = prof->steps();
        for (int i = 0; i < n; ++i) {
            const double lo = std::max(t0, prof->t0 + i * prof->dt);
            const double hi = std::min(t1, prof->t0 + (i + 1) * prof->dt);
            if (!(hi > lo)) continue;
            const double w = e.measure_within(lo, hi);
            if (w <= 0.0) continue;
            const Eigen::VectorXd left = sys.propagate(g * prof->at(lo), lo, t1);
            const Eigen::VectorXd right = sys.propagate(g * prof->at(hi), hi, t1);
            out.coeffs += 0.5 * w * (left + right);
        }
    }
    return out;
}

Eigen::MatrixXd reduced_trajectory(const ModeState& y0, const ControlSignal& u, const ModalSystem& sys,
                                   const std::vector<double>& times) {
    Eigen::MatrixXd out(sys.modes(), static_cast<Eigen::Index>(times.size()));
    ModeState y = y0;
    for (std::size_t i = 0; i < times.size(); ++i) {
        y = evolve_reduced(y, u, sys, times[i]);
        out.col(static_cast<Eigen::Index>(i)) = y.coeffs;
    }
    return out;
}

ForwardResult solve_forward(const ModeState& y0, const ControlSignal& u, const ModalSystem& sys,
                            const BrownianBundle& bundle) {
    check_bundle(sys, bundle);
    if (y0.time != 0.0) throw ArgumentError("forward solve starts at t = 0");
    ForwardResult r;
    r.reduced = evolve_reduced(y0, u, sys, sys.horizon());
    r.factor.resize(bundle.paths());
    std::vector<double> inc(static_cast<std::size_t>(bundle.n_steps()));
    std::vector<double> logm(inc.size() + 1);
    for (int p = 0; p < bundle.paths(); ++p) {
        bundle.fill_increments(p, inc);
        log_noise_factor(inc, sys.coefficients(), bundle.dt(), logm);
        r.factor[p] = std::exp(logm.back());
    }
    r.terminal.time = sys.horizon();
    r.terminal.coeffs = r.reduced.coeffs * r.factor.transpose();
    return r;
}

ForwardResult solve_forward(const ModeState&, const PathwiseControl&, const ModalSystem&, const BrownianBundle&) {
    throw UnsupportedError(
        "solve_forward needs an M-factored ControlSignal; use solve_forward_em for general pathwise controls");
}

PathwiseControl lift_control(const ControlSignal& v, const ModalSystem& sys, const BrownianBundle& bundle) {
    check_bundle(sys, bundle);
    std::vector<Eigen::VectorXd> impulses(static_cast<std::size_t>(bundle.n_steps()));
    for (int k = 0; k < bundle.n_steps(); ++k) {
        Eigen::VectorXd imp = Eigen::VectorXd::Zero(sys.modes());
        for (const auto& piece : v.step_pieces(bundle.time(k), bundle.time(k + 1), sys)) imp += piece.weight * piece.left;
        impulses[static_cast<std::size_t>(k)] = std::move(imp);
    }
    return [impulses = std::move(impulses)](int, int step, double factor) -> Eigen::VectorXd {
        return factor * impulses[static_cast<std::size_t>(step)];
    };
}

namespace {

/// First breakpoint of a or b strictly after t, or +inf.
double next_break(const CoefficientPair& c, double t) {
    double out = std::numeric_limits<double>::infinity();
    for (double x : c.breakpoints())
        if (x > t) out = std::min(out, x);
    return out;
}

/// One path of the explicit scheme driven by `inc` on steps of length dt.
void em_steps(const ModeState& y0, const PathwiseControl& u, const ModalSystem& sys, std::span<const double> inc,
              double dt, int path, StepScheme scheme, Eigen::MatrixXd* trajectory,
              Eigen::Ref<Eigen::VectorXd> terminal) {
    const auto& a = sys.coefficients().a();
    const auto& b = sys.coefficients().b();
    const Eigen::ArrayXd lam = sys.lambdas().array();
    const int n_steps = static_cast<int>(inc.size());
    Eigen::VectorXd y = y0.coeffs;
    const Eigen::ArrayXd decay = 1.0 - dt * lam;
    Eigen::VectorXd load(y.size());
    double log_m = 0.0;
    if (trajectory) trajectory->col(0) = y;
    // Coefficients are constant on each step, so look them up once per piece.
    double piece_end = -1.0, ak = 0.0, bk = 0.0;
    for (int k = 0; k < n_steps; ++k) {
        const double mid = (k + 0.5) * dt;
        if (mid >= piece_end) {
            ak = a(mid);
            bk = b(mid);
            piece_end = next_break(sys.coefficients(), mid);
        }
        const double dw = inc[static_cast<std::size_t>(k)];
        double noise = bk * dw;
        if (scheme == StepScheme::milstein) noise += 0.5 * bk * bk * (dw * dw - dt);
        // The control load uses the state before the step.
        if (u) load.noalias() = sys.gram() * u(path, k, std::exp(log_m));
        y.array() *= decay + (dt * ak + noise);
        if (u) y += load;
        // Decayed modes are flushed below 1e-290 so they stay out of the
        // subnormal range, where arithmetic is orders of magnitude slower.
        if ((k & 7) == 7) y = (y.array().abs() < 1e-290).select(0.0, y.array()).matrix();
        log_m += bk * dw - 0.5 * bk * bk * dt;
        if (trajectory) trajectory->col(k + 1) = y;
    }
    terminal = y;
}

void em_path(const ModeState& y0, const PathwiseControl& u, const ModalSystem& sys, const BrownianBundle& bundle,
             int path, StepScheme scheme, std::vector<double>& inc, Eigen::MatrixXd* trajectory,
             Eigen::Ref<Eigen::VectorXd> terminal) {
    bundle.fill_increments(path, inc);
    em_steps(y0, u, sys, inc, bundle.dt(), path, scheme, trajectory, terminal);
}

void check_em(const ModeState& y0, const ModalSystem& sys, const BrownianBundle& bundle) {
    check_bundle(sys, bundle);
    check_modes(y0.coeffs, sys, "initial state");
    if (y0.time != 0.0) throw ArgumentError("forward solve starts at t = 0");
    const double stiff = sys.lambdas().maxCoeff() * bundle.dt();
    if (stiff > 2.0) {
        std::ostringstream os;
        os << "explicit step is unstable: lambda_max * dt = " << stiff << " > 2; use fewer modes or more steps";
        throw ConfigError(os.str());
    }
}

}  // namespace

ModeEnsemble solve_forward_em(const ModeState& y0, const PathwiseControl& u, const ModalSystem& sys,
                              const BrownianBundle& bundle, StepScheme scheme) {
    check_em(y0, sys, bundle);
    ModeEnsemble out{Eigen::MatrixXd(sys.modes(), bundle.paths()), sys.horizon()};
    std::vector<double> inc(static_cast<std::size_t>(bundle.n_steps()));
    for (int p = 0; p < bundle.paths(); ++p) em_path(y0, u, sys, bundle, p, scheme, inc, nullptr, out.coeffs.col(p));
    return out;
}

Eigen::MatrixXd em_trajectory(const ModeState& y0, const PathwiseControl& u, const ModalSystem& sys,
                              const BrownianBundle& bundle, int path, StepScheme scheme) {
    check_em(y0, sys, bundle);
    Eigen::MatrixXd traj(sys.modes(), bundle.n_steps() + 1);
    Eigen::VectorXd terminal(sys.modes());
    std::vector<double> inc(static_cast<std::size_t>(bundle.n_steps()));
    em_path(y0, u, sys, bundle, path, scheme, inc, &traj, terminal);
    return traj;
}

StrongError strong_error(const ModeEnsemble& reference, const ModeEnsemble& approx) {
    if (reference.coeffs.rows() != approx.coeffs.rows() || reference.coeffs.cols() != approx.coeffs.cols())
        throw DimensionError("ensembles differ in shape");
    RunningStats abs_err;
    double sq = 0.0;
    StrongError e;
    for (Eigen::Index p = 0; p < reference.coeffs.cols(); ++p) {
        const double d = (reference.coeffs.col(p) - approx.coeffs.col(p)).norm();
        const double r = reference.coeffs.col(p).norm();
        abs_err.add(d);
        sq += d * d;
        if (r > 0.0) e.max_relative = std::max(e.max_relative, d / r);
    }
    e.mean = abs_err.mean();
    e.standard_error = abs_err.standard_error();
    e.rms = std::sqrt(sq / static_cast<double>(reference.coeffs.cols()));
    return e;
}

ConvergenceStudy strong_convergence(const ModeState& y0, const ControlSignal& u, const ModalSystem& sys,
                                    const BrownianBundle& fine, const std::vector<int>& factors,
                                    const std::vector<StepScheme>& schemes) {
    check_em(y0, sys, fine);
    if (factors.empty() || schemes.empty()) throw ArgumentError("convergence study needs factors and schemes");
    ConvergenceStudy study;
    study.schemes = schemes;
    std::vector<PathwiseControl> controls;
    for (int f : factors) {
        if (f < 1 || fine.n_steps() % f != 0) throw ArgumentError("coarsening factor must divide the step count");
        const BrownianBundle coarse = fine.coarsened(f);
        check_em(y0, sys, coarse);
        study.n_steps.push_back(coarse.n_steps());
        controls.push_back(u.is_zero() ? PathwiseControl{} : lift_control(u, sys, coarse));
    }
    const Eigen::VectorXd reduced = evolve_reduced(y0, u, sys, sys.horizon()).coeffs;
    const std::size_t nf = factors.size();
    std::vector<RunningStats> abs_err(schemes.size() * nf);
    std::vector<double> sq(abs_err.size(), 0.0), max_rel(abs_err.size(), 0.0);

    std::vector<double> inc(static_cast<std::size_t>(fine.n_steps()));
    std::vector<double> logm(inc.size() + 1);
    std::vector<double> coarse_inc;
    Eigen::VectorXd approx(sys.modes());
    for (int p = 0; p < fine.paths(); ++p) {
        fine.fill_increments(p, inc);
        log_noise_factor(inc, sys.coefficients(), fine.dt(), logm);
        const Eigen::VectorXd exact = std::exp(logm.back()) * reduced;
        const double r = exact.norm();
        for (std::size_t i = 0; i < nf; ++i) {
            const int f = factors[i];
            coarse_inc.assign(inc.size() / static_cast<std::size_t>(f), 0.0);
            for (std::size_t k = 0; k < inc.size(); ++k) coarse_inc[k / static_cast<std::size_t>(f)] += inc[k];
            for (std::size_t s = 0; s < schemes.size(); ++s) {
                em_steps(y0, controls[i], sys, coarse_inc, fine.dt() * f, p, schemes[s], nullptr, approx);
                const double d = (exact - approx).norm();
                const std::size_t slot = s * nf + i;
                abs_err[slot].add(d);
                sq[slot] += d * d;
                if (r > 0.0) max_rel[slot] = std::max(max_rel[slot], d / r);
            }
        }
    }
    study.errors.assign(schemes.size(), std::vector<StrongError>(nf));
    for (std::size_t s = 0; s < schemes.size(); ++s)
        for (std::size_t i = 0; i < nf; ++i) {
            const std::size_t slot = s * nf + i;
            auto& e = study.errors[s][i];
            e.mean = abs_err[slot].mean();
            e.standard_error = abs_err[slot].standard_error();
            e.rms = std::sqrt(sq[slot] / fine.paths());
            e.max_relative = max_rel[slot];
        }
    return study;
}

EnergyReport energy_ratio(const ModeState& y0, const ControlSignal& u, const ModalSystem& sys,
                          const BrownianBundle& bundle, int stride) {
    check_bundle(sys, bundle);
    if (stride < 1) throw ArgumentError("energy sampling stride must be positive");
    std::vector<int> steps;
    for (int k = 0; k < bundle.n_steps(); k += stride) steps.push_back(k);
    steps.push_back(bundle.n_steps());
    std::vector<double> times;
    for (int k : steps) times.push_back(bundle.time(k));
    const Eigen::MatrixXd traj = reduced_trajectory(y0, u, sys, times);
    const Eigen::VectorXd energy = traj.colwise().squaredNorm().transpose();

    RunningStats stats;
    std::vector<double> inc(static_cast<std::size_t>(bundle.n_steps()));
    std::vector<double> logm(inc.size() + 1);
    for (int p = 0; p < bundle.paths(); ++p) {
        bundle.fill_increments(p, inc);
        log_noise_factor(inc, sys.coefficients(), bundle.dt(), logm);
        double best = 0.0;
        for (std::size_t i = 0; i < steps.size(); ++i)
            best = std::max(best, std::exp(2.0 * logm[static_cast<std::size_t>(steps[i])]) *
                                      energy[static_cast<Eigen::Index>(i)]);
        stats.add(best);
    }
    EnergyReport r;
    r.expected_max_energy = stats.mean();
    r.standard_error = stats.standard_error();
    const double un = u.linf_norm(sys);
    r.data_norm = y0.coeffs.squaredNorm() + un * un;
    r.ratio = r.data_norm > 0.0 ? r.expected_max_energy / r.data_norm : 0.0;
    return r;
}

Eigen::VectorXd adjoint_state(const Eigen::VectorXd& zT, const ModalSystem& sys, double t) {
    check_modes(zT, sys, "terminal state");
    return sys.propagate(zT, t, sys.horizon());
}

AdjointSolution solve_backward(const ModeState& zT, const ModalSystem& sys, double s, int n_steps) {
    check_modes(zT.coeffs, sys, "terminal state");
    if (!(s >= 0.0 && s < sys.horizon())) throw ArgumentError("backward solve needs 0 <= s < T");
    if (n_steps < 1) throw ArgumentError("backward solve needs n_steps >= 1");
    AdjointSolution sol;
    sol.terminal = {zT.coeffs, sys.horizon()};
    sol.z.resize(sys.modes(), n_steps + 1);
    sol.Z = Eigen::MatrixXd::Zero(sys.modes(), n_steps + 1);
    for (int k = 0; k <= n_steps; ++k) {
        const double t = k == n_steps ? sys.horizon() : s + (sys.horizon() - s) * k / n_steps;
        sol.times.push_back(t);
        sol.z.col(k) = adjoint_state(zT.coeffs, sys, t);
    }
    return sol;
}

double adjoint_residual(const AdjointSolution& sol, const ModalSystem& sys) {
    const double scale = std::max(sol.z.cwiseAbs().maxCoeff(), 1e-300);
    double worst = 0.0;
    for (std::size_t k = 0; k + 1 < sol.times.size(); ++k) {
        const auto kk = static_cast<Eigen::Index>(k);
        // dz_j = (lambda_j - a) z_j dt with Z = 0, integrated exactly over the step.
        const Eigen::VectorXd stepped = sys.propagate(sol.z.col(kk + 1), sol.times[k], sol.times[k + 1]);
        worst = std::max(worst, (sol.z.col(kk) - stepped).cwiseAbs().maxCoeff());
    }
    worst = std::max(worst, sol.Z.cwiseAbs().maxCoeff());
    return worst / scale;
}

void ChaosTerminal::check_supported() const {
    if (coefficients.empty()) throw ArgumentError("chaos terminal data has no coefficients");
    for (const auto& c : coefficients)
        if (c.size() != coefficients.front().size()) throw DimensionError("chaos coefficients differ in length");
    for (std::size_t p = 2; p < coefficients.size(); ++p)
        if (coefficients[p].cwiseAbs().maxCoeff() > 0.0)
            throw UnsupportedError("terminal data beyond the first Wiener chaos (c0 + c1 W(T)) is not supported");
}

bool ChaosTerminal::deterministic() const {
    for (std::size_t p = 1; p < coefficients.size(); ++p)
        if (coefficients[p].cwiseAbs().maxCoeff() > 0.0) return false;
    return true;
}

Eigen::VectorXd ChaosTerminal::c0() const { return coefficients.front(); }

Eigen::VectorXd ChaosTerminal::c1() const {
    return coefficients.size() > 1 ? coefficients[1] : Eigen::VectorXd::Zero(modes());
}

Eigen::VectorXd ChaosTerminal::at(double w_terminal) const { return c0() + w_terminal * c1(); }

AdjointSolution solve_backward(const ChaosTerminal& zT, const ModalSystem& sys, double s, int n_steps) {
    zT.check_supported();
    if (!zT.deterministic())
        throw UnsupportedError("random terminal data needs solve_backward_mc");
    return solve_backward(ModeState{zT.c0(), sys.horizon()}, sys, s, n_steps);
}

Eigen::VectorXd BackwardMcResult::z_at(int step, double w) const {
    const auto k = static_cast<Eigen::Index>(step);
    return (weight.col(k).array() * (terminal.c0().array() + terminal.c1().array() * (w + shift[k]))).matrix();
}

BackwardMcResult solve_backward_mc(const ChaosTerminal& zT, const ModalSystem& sys, const BrownianBundle& bundle,
                                   int regression_points) {
    zT.check_supported();
    check_modes(zT.c0(), sys, "terminal state");
    check_bundle(sys, bundle);
    const int n = bundle.n_steps();
    const int m = sys.modes();
    BackwardMcResult r;
    r.terminal = zT;
    r.weight.resize(m, n + 1);
    r.shift.resize(n + 1);
    for (int k = 0; k <= n; ++k) {
        const double t = bundle.time(k);
        r.times.push_back(t);
        r.weight.col(k) = adjoint_state(Eigen::VectorXd::Ones(m), sys, t);
        r.shift[k] = sys.coefficients().b().integral(t, sys.horizon());
    }
    const Eigen::VectorXd c1 = zT.c1();
    r.Z = r.weight.array().colwise() * c1.array();

    const int points = std::clamp(regression_points, 0, n);
    for (int i = 0; i < points; ++i)
        r.regression_steps.push_back(points == 1 ? 0 : static_cast<int>(std::lround(double(i) * (n - 1) / (points - 1))));
    r.regression_steps.erase(std::unique(r.regression_steps.begin(), r.regression_steps.end()),
                             r.regression_steps.end());
    const auto q = static_cast<Eigen::Index>(r.regression_steps.size());
    if (q == 0) return r;

    // Per (mode, step) sums for the regression y = alpha + beta x, x = W(t_k).
    Eigen::MatrixXd sy = Eigen::MatrixXd::Zero(m, q), syy = sy, sxy = sy;
    Eigen::VectorXd sx = Eigen::VectorXd::Zero(q), sxx = sx;
    const double dt = bundle.dt();
    for (int p = 0; p < bundle.paths(); ++p) {
        const auto w = bundle.path_values(p);
        for (Eigen::Index i = 0; i < q; ++i) {
            const int k = r.regression_steps[static_cast<std::size_t>(i)];
            const double x = w[static_cast<std::size_t>(k)];
            const double dw = w[static_cast<std::size_t>(k) + 1] - x;
            const Eigen::VectorXd y = (r.z_at(k + 1, x + dw) - r.z_at(k, x)) * (dw / dt);
            sx[i] += x;
            sxx[i] += x * x;
            sy.col(i) += y;
            syy.col(i) += y.cwiseAbs2();
            sxy.col(i) += x * y;
        }
    }
    const double np = bundle.paths();
    r.Z_regressed.resize(m, q);
    r.Z_regressed_se.resize(m, q);
    r.Z_slope.resize(m, q);
    for (Eigen::Index i = 0; i < q; ++i) {
        const double mx = sx[i] / np;
        const double vxx = sxx[i] - np * mx * mx;
        for (int j = 0; j < m; ++j) {
            const double my = sy(j, i) / np;
            const double vxy = sxy(j, i) - np * mx * my;
            const double vyy = syy(j, i) - np * my * my;
            // A constant regressor (W(0) = 0) leaves only the intercept.
            const bool slope = vxx > 0.0;
            const double beta = slope ? vxy / vxx : 0.0;
            const double alpha = my - beta * mx;
            const double rss = std::max(0.0, vyy - beta * vxy);
            const double dof = np - (slope ? 2.0 : 1.0);
            const double sigma2 = dof > 0.0 ? rss / dof : 0.0;
            const double se_alpha = std::sqrt(sigma2 * (1.0 / np + (slope ? mx * mx / vxx : 0.0)));
            r.Z_regressed(j, i) = alpha;
            r.Z_regressed_se(j, i) = se_alpha;
            r.Z_slope(j, i) = beta;
        }
    }
    return r;
}

namespace {

double exact_control_pairing(const ControlSignal& u, const Eigen::VectorXd& zT, const ModalSystem& sys) {
    const auto& c = sys.coefficients();
    const auto& e = sys.time_set().intervals();
    const auto& g = sys.gram();
    const double T = sys.horizon();
    double total = 0.0;
    for (const auto& s : u.stages()) {
        const double p = std::max(0.0, s.begin);
        const double q = std::min(T, s.end);
        if (!(q > p)) continue;
        for (std::size_t k = 0; k < s.modes.size(); ++k) {
            const int i = s.modes[k];
            const double tail = s.zeta[static_cast<Eigen::Index>(k)] * sys.propagator(i, q, s.end);
            for (int j = 0; j < sys.modes(); ++j) {
                if (g(i, j) == 0.0 || zT[j] == 0.0) continue;
                total += tail * g(i, j) * zT[j] * sys.propagator(j, q, T) *
                         integrate_exponential(c, e, p, q, pair_profile(sys.lambda(i) + sys.lambda(j)));
            }
        }
    }
    if (const auto& prof = u.profile()) {
        for (int i = 0; i < prof->steps(); ++i) {
            const double lo = std::max(0.0, prof->t0 + i * prof->dt);
            const double hi = std::min(T, prof->t0 + (i + 1) * prof->dt);
            if (!(hi > lo)) continue;
            const double w = e.measure_within(lo, hi);
            if (w <= 0.0) continue;
            const double fl = prof->at(lo).dot(g * adjoint_state(zT, sys, lo));
            const double fr = prof->at(hi).dot(g * adjoint_state(zT, sys, hi));
            total += 0.5 * w * (fl + fr);
        }
    }
    return total;
}

}  // namespace

DualityReport check_duality(const ModeState& y0, const ControlSignal& u, const ModeState& zT,
                            const ModalSystem& sys) {
    check_modes(y0.coeffs, sys, "initial state");
    check_modes(zT.coeffs, sys, "terminal state");
    if (y0.time != 0.0) throw ArgumentError("duality check starts at t = 0");
    const ModeState yT = evolve_reduced(y0, u, sys, sys.horizon());
    DualityReport r;
    r.lhs = yT.coeffs.dot(zT.coeffs) - y0.coeffs.dot(adjoint_state(zT.coeffs, sys, 0.0));
    r.rhs = exact_control_pairing(u, zT.coeffs, sys);
    r.residual = std::abs(r.lhs - r.rhs) / std::max({std::abs(r.lhs), std::abs(r.rhs), 1.0});
    r.difference_mean = r.lhs - r.rhs;
    return r;
}

DualityReport check_duality(const ModeState& y0, const ControlSignal& u, const ChaosTerminal& zT,
                            const ModalSystem& sys, const BrownianBundle& bundle) {
    zT.check_supported();
    check_modes(y0.coeffs, sys, "initial state");
    check_modes(zT.c0(), sys, "terminal state");
    check_bundle(sys, bundle);
    if (y0.time != 0.0) throw ArgumentError("duality check starts at t = 0");

    const int n = bundle.n_steps();
    const BackwardMcResult adj = solve_backward_mc(zT, sys, bundle, 0);
    const Eigen::VectorXd c0 = zT.c0();
    const Eigen::VectorXd c1 = zT.c1();
    const Eigen::VectorXd yT = evolve_reduced(y0, u, sys, sys.horizon()).coeffs;
    const double y0_z0 = y0.coeffs.dot(adj.z_at(0, 0.0));
    const double yT_c0 = yT.dot(c0);
    const double yT_c1 = yT.dot(c1);

    // Per step: RHS contribution = M_k (aL + bL W_k) + M_{k+1} (aR + bR W_{k+1}).
    struct StepTerm {
        int k;
        double al, bl, ar, br;
    };
    std::vector<StepTerm> terms;
    const auto& g = sys.gram();
    for (int k = 0; k < n; ++k) {
        const auto pieces = u.step_pieces(bundle.time(k), bundle.time(k + 1), sys);
        if (pieces.empty()) continue;
        StepTerm t{k, 0, 0, 0, 0};
        const auto kl = static_cast<Eigen::Index>(k);
        const Eigen::VectorXd el0 = adj.weight.col(kl).cwiseProduct(c0 + adj.shift[kl] * c1);
        const Eigen::VectorXd el1 = adj.weight.col(kl).cwiseProduct(c1);
        const Eigen::VectorXd er0 = adj.weight.col(kl + 1).cwiseProduct(c0 + adj.shift[kl + 1] * c1);
        const Eigen::VectorXd er1 = adj.weight.col(kl + 1).cwiseProduct(c1);
        for (const auto& piece : pieces) {
            const Eigen::VectorXd gl = g * piece.left;
            const Eigen::VectorXd gr = g * piece.right;
            const double h = 0.5 * piece.weight;
            t.al += h * gl.dot(el0);
            t.bl += h * gl.dot(el1);
            t.ar += h * gr.dot(er0);
            t.br += h * gr.dot(er1);
        }
        terms.push_back(t);
    }

    RunningStats lhs, rhs, diff;
    std::vector<double> inc(static_cast<std::size_t>(n));
    std::vector<double> logm(inc.size() + 1);
    std::vector<double> w(inc.size() + 1);
    for (int p = 0; p < bundle.paths(); ++p) {
        bundle.fill_increments(p, inc);
        log_noise_factor(inc, sys.coefficients(), bundle.dt(), logm);
        w[0] = 0.0;
        for (int k = 0; k < n; ++k) w[k + 1] = w[k] + inc[static_cast<std::size_t>(k)];
        const double mT = std::exp(logm.back());
        const double l = mT * (yT_c0 + yT_c1 * w.back()) - y0_z0;
        double rr = 0.0;
        for (const auto& t : terms) {
            const auto k = static_cast<std::size_t>(t.k);
            rr += std::exp(logm[k]) * (t.al + t.bl * w[k]) + std::exp(logm[k + 1]) * (t.ar + t.br * w[k + 1]);
        }
        lhs.add(l);
        rhs.add(rr);
        diff.add(l - rr);
    }
    DualityReport r;
    r.monte_carlo = true;
    r.lhs = lhs.mean();
    r.rhs = rhs.mean();
    r.residual = std::abs(r.lhs - r.rhs) / std::max({std::abs(r.lhs), std::abs(r.rhs), 1.0});
    r.difference_mean = diff.mean();
    r.difference_se = diff.standard_error();
    r.paths = diff.count();
    return r;
}

}  // namespace wentzell
