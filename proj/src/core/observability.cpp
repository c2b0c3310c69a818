#include "core/observability.hpp"

#include <algorithm>
#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/tools/minima.hpp>
#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

#include "core/errors.hpp"

namespace wentzell {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double down(double x) { return std::nextafter(x, -kInf); }
double up(double x) { return std::nextafter(x, kInf); }

/// Lower enclosure of m(E ∩ (a, b)): every subtraction and addition rounded down.
double measure_lower(const TimeSet& e, double a, double b) {
    double total = 0.0;
    for (const auto& piece : e.intervals().intervals()) {
        const double lo = std::max(piece.lo, a);
        const double hi = std::min(piece.hi, b);
        if (hi > lo) total = down(total + down(hi - lo));
    }
    return total;
}

double gap_upper(double a, double b) { return up(b - a); }

struct Node {
    double t;
    double w;
};

/// Composite Gauss-Legendre nodes on E ∩ (p, q). Each component is cut at the
/// coefficient breakpoints and into panels halving in width toward its right
/// end, down to a width resolving exp(-lambda_max (hi - t)).
std::vector<Node> observation_nodes(const ModalSystem& sys, double p, double q) {
    using Gauss = boost::math::quadrature::gauss<double, 20>;
    const auto& xs = Gauss::abscissa();
    const auto& ws = Gauss::weights();
    const double lambda_max = std::max(1.0, sys.lambdas().maxCoeff());
    const auto breaks = sys.coefficients().breakpoints();

    std::vector<Node> nodes;
    for (const auto& piece : sys.time_set().intervals().clip(p, q)) {
        const double len = piece.length();
        const double w_min = std::min(len, 1e-3 / lambda_max);
        std::vector<double> cuts{piece.lo, piece.hi};
        for (double w = w_min; w < len; w *= 2.0) cuts.push_back(piece.hi - w);
        for (double b : breaks)
            if (b > piece.lo && b < piece.hi) cuts.push_back(b);
        std::sort(cuts.begin(), cuts.end());
        cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());
        for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
            const double mid = 0.5 * (cuts[i] + cuts[i + 1]);
            const double half = 0.5 * (cuts[i + 1] - cuts[i]);
            if (!(half > 0.0)) continue;
            for (std::size_t k = 0; k < xs.size(); ++k) {
                nodes.push_back({mid - half * xs[k], half * ws[k]});
                nodes.push_back({mid + half * xs[k], half * ws[k]});
            }
        }
    }
    return nodes;
}

double g0_norm_of(const Eigen::VectorXd& z, const ModalSystem& sys) {
    return std::sqrt(std::max(0.0, z.dot(sys.gram() * z)));
}

Eigen::VectorXd random_unit(int m, std::mt19937_64& rng) {
    std::normal_distribution<double> normal;
    Eigen::VectorXd v(m);
    do {
        for (int j = 0; j < m; ++j) v[j] = normal(rng);
    } while (v.norm() == 0.0);
    return v / v.norm();
}

double log_sum_exp(double a, double b) {
    if (a == -kInf) return b;
    if (b == -kInf) return a;
    const double m = std::max(a, b);
    return m + std::log(std::exp(a - m) + std::exp(b - m));
}

double safe_log(double x) { return x > 0.0 ? std::log(x) : -kInf; }

}  // namespace

DecayCheck check_highmode_decay(const ModeState& zT, double r, double t, const ModalSystem& sys) {
    if (zT.coeffs.size() != sys.modes()) throw DimensionError("terminal state mode count differs from the system");
    const double T = sys.horizon();
    if (!(t >= 0.0 && t <= T)) throw ArgumentError("decay check time outside [0, T]");
    const Eigen::VectorXd z = adjoint_state(zT.coeffs, sys, t);
    DecayCheck d;
    for (int j = 0; j < sys.modes(); ++j)
        if (sys.lambda(j) > r) d.lhs += z[j] * z[j];
    d.rhs = std::exp((-2.0 * r + sys.coefficients().delta()) * (T - t)) * zT.coeffs.squaredNorm();
    return d;
}

InterpolationSample check_interpolation(const ModeState& zT, double t, const ModalSystem& sys) {
    if (!(t < sys.horizon())) throw ArgumentError("interpolation needs t < T");
    const Eigen::VectorXd z = adjoint_state(zT.coeffs, sys, t);
    InterpolationSample s;
    s.t = t;
    s.state_energy = z.squaredNorm();
    s.g0_norm = g0_norm_of(z, sys);
    s.terminal_norm = zT.norm();
    const double den = s.g0_norm * s.terminal_norm;
    s.ratio = den > 0.0 ? s.state_energy / den : (s.state_energy > 0.0 ? kInf : 0.0);
    s.ratio_a = s.terminal_norm > 0.0 ? s.g0_norm / s.terminal_norm : 0.0;
    return s;
}

double dominating_constant(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size() || x.empty()) throw ArgumentError("dominating constant needs matching nonempty samples");
    for (double v : y)
        if (v == kInf) return kInf;
    auto ok = [&](double c) {
        for (std::size_t i = 0; i < x.size(); ++i)
            if (std::log(c) + c * x[i] < y[i]) return false;
        return true;
    };
    double lo = 1e-12, hi = 1.0;
    if (ok(lo)) return lo;
    while (!ok(hi)) {
        lo = hi;
        hi *= 2.0;
        if (hi > 1e12) throw NumericError("no finite dominating constant below 1e12");
    }
    for (int it = 0; it < 200 && hi - lo > 1e-14 * hi; ++it) {
        const double mid = std::sqrt(lo * hi);
        (ok(mid) ? hi : lo) = mid;
    }
    return hi;
}

InterpolationProfile interpolation_sweep(const ModalSystem& sys, const std::vector<double>& times, int states,
                                         std::uint64_t seed) {
    if (times.empty() || states < 1) throw ArgumentError("interpolation sweep needs times and states");
    std::mt19937_64 rng(seed);
    std::vector<Eigen::VectorXd> terminal;
    for (int k = 0; k < states; ++k) terminal.push_back(random_unit(sys.modes(), rng));

    InterpolationProfile prof;
    prof.times = times;
    std::vector<double> x, logw;
    for (double t : times) {
        double worst = 0.0;
        for (const auto& zT : terminal) {
            const auto s = check_interpolation(ModeState{zT, sys.horizon()}, t, sys);
            prof.samples.push_back(s);
            worst = std::max(worst, s.ratio);
            prof.a_max = std::max(prof.a_max, s.ratio_a);
        }
        prof.worst.push_back(worst);
        x.push_back(1.0 / (sys.horizon() - t));
        logw.push_back(std::log(worst));
    }
    if (times.size() >= 2) prof.log_ratio_fit = fit_line(x, logw);
    prof.dominating_constant = dominating_constant(x, logw);
    prof.a_bound = std::exp(sys.coefficients().a_sup() * sys.horizon());
    return prof;
}

SlicingSequence build_slicing(const TimeSet& time_set, double s, double c_fit, double dt) {
    const double T = time_set.horizon();
    if (!(s >= 0.0 && s < T)) throw ArgumentError("slicing needs 0 <= s < T");
    if (!(c_fit >= 0.0) || !std::isfinite(c_fit)) throw ArgumentError("slicing needs a finite constant C >= 0");
    if (!(dt > 0.0)) throw ArgumentError("slicing needs a positive step dt");
    auto components = time_set.intervals().clip(s, T);
    if (components.empty()) {
        std::ostringstream os;
        os << "m((s, T) ∩ E) = 0 for s = " << s << ": no time slice can observe the adjoint state";
        throw MeasureConditionError(os.str());
    }
    std::stable_sort(components.begin(), components.end(),
                     [](const Interval& a, const Interval& b) { return a.length() > b.length(); });

    const double rho = (c_fit + 0.5) / (c_fit + 1.0);
    for (const auto& comp : components) {
        SlicingSequence seq;
        seq.s = s;
        seq.c_fit = c_fit;
        seq.rho = rho;
        seq.dt = dt;
        seq.component = comp;
        seq.t_tilde = comp.hi - std::min(dt, comp.length() / 10.0);
        const double t1 = std::max(comp.lo, s);
        seq.times.push_back(t1);
        double d = (seq.t_tilde - t1) * (1.0 - rho);
        while (d >= dt) {
            const double t = seq.times.back();
            seq.times.push_back(t + d);
            seq.etas.push_back(t + d - d / 6.0);
            d *= rho;
        }
        seq.truncation = static_cast<int>(seq.times.size()) - 1;
        if (seq.truncation > 0 && verify_slicing(seq, time_set).ok()) return seq;
    }
    throw NumericError("no component of E ∩ (s, T) admits a verified slicing at this step size");
}

SlicingCheck verify_slicing(const SlicingSequence& seq, const TimeSet& time_set) {
    SlicingCheck c;
    const int n = seq.truncation;
    for (int i = 0; i < n; ++i) {
        const double a = seq.times[static_cast<std::size_t>(i)];
        const double b = seq.times[static_cast<std::size_t>(i) + 1];
        const double eta = seq.etas[static_cast<std::size_t>(i)];
        if (!(b > a) || !(eta > a && eta < b) || !(b <= seq.t_tilde)) c.monotone = false;
        const double g_hi = gap_upper(a, b);
        const double m_slice = measure_lower(time_set, a, b);
        const double m_eta = measure_lower(time_set, a, eta);
        // Compare m >= g/3 through m * 3 >= g with both sides rounded adversely.
        if (!(down(m_slice * 3.0) >= g_hi)) c.p2 = false;
        if (!(down(m_eta * 6.0) >= g_hi)) c.inemes = false;
        c.worst_p2_ratio = std::min(c.worst_p2_ratio, m_slice / (b - a));
        c.worst_inemes_ratio = std::min(c.worst_inemes_ratio, m_eta / (b - a));
        if (i + 1 < n) {
            const double next = seq.times[static_cast<std::size_t>(i) + 2] - b;
            const double defect = std::abs(next - seq.rho * (b - a));
            const double ulp = up(seq.times[static_cast<std::size_t>(i) + 2]) - seq.times[static_cast<std::size_t>(i) + 2];
            const double in_ulps = defect / ulp;
            c.worst_p3_defect = std::max(c.worst_p3_defect, in_ulps);
            if (in_ulps > 4.0) c.p3 = false;
        }
    }
    return c;
}

double observation_integral(const Eigen::VectorXd& zT, const ModalSystem& sys, double p, double q) {
    if (zT.size() != sys.modes()) throw DimensionError("terminal state mode count differs from the system");
    if (!(q > p)) return 0.0;
    double total = 0.0;
    for (const auto& node : observation_nodes(sys, p, q))
        total += node.w * g0_norm_of(adjoint_state(zT, sys, node.t), sys);
    return total;
}

namespace {

/// Minimum of |z(t)|_{G0} over sample times in E ∩ (a, b).
double min_g0_norm(const Eigen::VectorXd& zT, const ModalSystem& sys, double a, double b) {
    double best = kInf;
    for (const auto& piece : sys.time_set().intervals().clip(a, b)) {
        constexpr int samples = 64;
        for (int k = 0; k <= samples; ++k) {
            const double t = piece.lo + piece.length() * k / samples;
            best = std::min(best, g0_norm_of(adjoint_state(zT, sys, t), sys));
        }
    }
    return best;
}

}  // namespace

TelescopingCheck check_telescoping(const Eigen::VectorXd& zT, const SlicingSequence& seq, const ModalSystem& sys,
                                   double c) {
    TelescopingCheck r;
    const int n = seq.truncation;
    if (n < 1) throw ArgumentError("telescoping needs at least one retained slice");
    std::vector<double> log_lambda(static_cast<std::size_t>(n) + 1);
    for (int i = 0; i <= n; ++i)
        log_lambda[static_cast<std::size_t>(i)] =
            safe_log(adjoint_state(zT, sys, seq.times[static_cast<std::size_t>(i)]).norm());

    // log of sum_i (C/m_i) obs_i, accumulated for the final bound.
    double log_sum = -kInf;
    const double h = c + 0.5;
    for (int i = 0; i < n; ++i) {
        const auto ii = static_cast<std::size_t>(i);
        const double a = seq.times[ii];
        const double b = seq.times[ii + 1];
        const double d = b - a;
        const double eta = seq.etas[ii];
        const double m_i = sys.time_set().intervals().measure_within(a, eta);
        const double obs = observation_integral(zT, sys, a, eta);

        const double min_obs = min_g0_norm(zT, sys, a, eta);
        const double slice_lhs = 2.0 * log_lambda[ii];
        const double slice_rhs = std::log(c) + c / d + safe_log(min_obs) + log_lambda[ii + 1];
        if (slice_lhs > slice_rhs + 1e-12 * std::abs(slice_rhs)) r.slice = false;

        const double d_next = i + 1 < n ? seq.gap(i + 1) : seq.rho * d;
        const double term = safe_log(c / m_i * obs);
        const double chain_lhs = -h / d + log_lambda[ii];
        const double chain_rhs = log_sum_exp(-h / d_next + log_lambda[ii + 1], term);
        if (chain_lhs > chain_rhs + 1e-12 * std::abs(chain_rhs)) r.chain = false;
        log_sum = log_sum_exp(log_sum, term);
    }
    const double d1 = seq.gap(0);
    const double d_tail = seq.rho * seq.gap(n - 1);
    const double tail = -h / d_tail + log_lambda[static_cast<std::size_t>(n)];
    r.final_lhs = 2.0 * log_lambda[0];
    r.final_log_rhs = (2.0 * c + 1.0) / d1 + 2.0 * log_sum_exp(tail, log_sum);
    r.final_bound = r.final_lhs <= r.final_log_rhs + 1e-12 * std::abs(r.final_log_rhs);
    r.final_lhs = std::exp(r.final_lhs);

    const double t1 = seq.times.front();
    r.energy_lhs = adjoint_state(zT, sys, seq.s).squaredNorm();
    r.energy_rhs = std::exp(2.0 * sys.coefficients().a_sup() * (t1 - seq.s)) * adjoint_state(zT, sys, t1).squaredNorm();
    r.energy_transfer = r.energy_lhs <= r.energy_rhs * (1.0 + 1e-12);
    return r;
}

double slice_constant(const std::vector<Eigen::VectorXd>& states, const SlicingSequence& seq,
                      const ModalSystem& sys) {
    std::vector<double> x, y;
    for (const auto& zT : states) {
        for (int i = 0; i < seq.truncation; ++i) {
            const auto ii = static_cast<std::size_t>(i);
            const double a = seq.times[ii];
            const double b = seq.times[ii + 1];
            const double li = adjoint_state(zT, sys, a).norm();
            const double ln = adjoint_state(zT, sys, b).norm();
            const double obs = min_g0_norm(zT, sys, a, seq.etas[ii]);
            x.push_back(1.0 / (b - a));
            y.push_back(obs > 0.0 && ln > 0.0 ? std::log(li * li / (obs * ln)) : kInf);
        }
    }
    return dominating_constant(x, y);
}

ObservabilityReport estimate_observability_constant(const ModalSystem& sys, double s, int n_samples,
                                                    std::uint64_t seed) {
    const double T = sys.horizon();
    if (!(s >= 0.0 && s < T)) throw ArgumentError("observability needs 0 <= s < T");
    if (n_samples < 1) throw ArgumentError("observability needs at least one start");
    const int m = sys.modes();
    ObservabilityReport rep;

    if (!(sys.time_set().intervals().measure_within(s, T) > 0.0)) {
        rep.regime = ObservabilityRegime::fails;
        Eigen::VectorXd w = Eigen::VectorXd::Zero(m);
        w[0] = 1.0;
        rep.witness = w;
        rep.maximizer = w;
        rep.constant_estimate = kInf;
        rep.samples.push_back({0, adjoint_state(w, sys, s).squaredNorm(), 0.0, kInf});
        return rep;
    }

    const auto nodes = observation_nodes(sys, s, T);
    const auto q = nodes.size();
    // H_q = diag(e(t_q)) G diag(e(t_q)) so that |z(t_q)|_{G0}^2 = zT' H_q zT.
    std::vector<Eigen::MatrixXd> h(q);
    for (std::size_t k = 0; k < q; ++k) {
        const Eigen::VectorXd e = adjoint_state(Eigen::VectorXd::Ones(m), sys, nodes[k].t);
        h[k] = e.asDiagonal() * sys.gram() * e.asDiagonal();
    }
    const Eigen::VectorXd es = adjoint_state(Eigen::VectorXd::Ones(m), sys, s);
    const Eigen::VectorXd num_diag = es.cwiseAbs2();

    auto evaluate = [&](const Eigen::VectorXd& z, double& num, double& den) {
        num = num_diag.dot(z.cwiseAbs2());
        den = 0.0;
        for (std::size_t k = 0; k < q; ++k) den += nodes[k].w * std::sqrt(std::max(0.0, z.dot(h[k] * z)));
    };

    std::mt19937_64 rng(seed);
    double best_ratio = -1.0;
    for (int id = 0; id < n_samples; ++id) {
        Eigen::VectorXd z;
        if (id < m) {
            z = Eigen::VectorXd::Zero(m);
            z[id] = 1.0;
        } else {
            z = random_unit(m, rng);
        }
        double num = 0.0, den = 0.0;
        evaluate(z, num, den);
        if (den == 0.0) {
            rep.regime = ObservabilityRegime::fails;
            rep.witness = z;
            rep.constant_estimate = kInf;
            rep.samples.push_back({id, num, 0.0, kInf});
            rep.maximizer = z;
            return rep;
        }
        double ratio = num / (den * den);

        for (int sweep = 0; sweep < 200 && m > 1; ++sweep) {
            const double before = ratio;
            for (int i = 0; i < m; ++i) {
                Eigen::VectorXd b = -z[i] * z;
                b[i] += 1.0;
                const double bn = b.norm();
                if (bn < 1e-12) continue;
                b /= bn;
                // Quadratic forms along the great circle z cos(theta) + b sin(theta).
                const double na = num_diag.dot(z.cwiseAbs2());
                const double nb = num_diag.dot(z.cwiseProduct(b));
                const double nc = num_diag.dot(b.cwiseAbs2());
                std::vector<double> ha(q), hb(q), hc(q);
                for (std::size_t k = 0; k < q; ++k) {
                    const Eigen::VectorXd hz = h[k] * z;
                    ha[k] = z.dot(hz);
                    hb[k] = b.dot(hz);
                    hc[k] = b.dot(h[k] * b);
                }
                auto neg_ratio = [&](double th) {
                    const double c = std::cos(th), sn = std::sin(th);
                    const double nn = c * c * na + 2.0 * c * sn * nb + sn * sn * nc;
                    double dd = 0.0;
                    for (std::size_t k = 0; k < q; ++k)
                        dd += nodes[k].w * std::sqrt(std::max(0.0, c * c * ha[k] + 2.0 * c * sn * hb[k] + sn * sn * hc[k]));
                    return dd > 0.0 ? -nn / (dd * dd) : -kInf;
                };
                constexpr int scan = 32;
                const double step = std::numbers::pi / scan;
                double best_th = 0.0, best_val = neg_ratio(0.0);
                for (int k = 0; k <= scan; ++k) {
                    const double th = -0.5 * std::numbers::pi + k * step;
                    const double v = neg_ratio(th);
                    if (v < best_val) {
                        best_val = v;
                        best_th = th;
                    }
                }
                const auto refined = boost::math::tools::brent_find_minima(neg_ratio, best_th - step, best_th + step, 52);
                if (refined.second < best_val) {
                    best_val = refined.second;
                    best_th = refined.first;
                }
                if (-best_val > ratio) {
                    z = std::cos(best_th) * z + std::sin(best_th) * b;
                    z /= z.norm();
                    ratio = -best_val;
                }
            }
            if (ratio - before <= 1e-12 * ratio) break;
        }
        evaluate(z, num, den);
        ratio = num / (den * den);
        rep.samples.push_back({id, num, den * den, ratio});
        if (ratio > best_ratio) {
            best_ratio = ratio;
            rep.maximizer = z;
        }
    }
    rep.constant_estimate = best_ratio;
    return rep;
}

bool unique_continuation_implication(double observation, double terminal_norm, double tol, double amplification) {
    return !(observation <= tol && terminal_norm > tol * amplification);
}

UniqueContinuation check_unique_continuation(const ModeState& zT, const ModalSystem& sys,
                                             const ControlRegion& g0, double s, double tol,
                                             double amplification) {
    if (g0.size() != sys.basis().nodes()) throw DimensionError("control region was built for another grid");
    UniqueContinuation u;
    u.terminal_norm = zT.norm();
    const double T = sys.horizon();
    std::vector<Eigen::Index> inside;
    for (Eigen::Index i = 0; i < g0.size(); ++i)
        if (g0.indicator()[static_cast<std::size_t>(i)]) inside.push_back(i);
    for (const auto& piece : sys.time_set().intervals().clip(s, T)) {
        constexpr int samples = 256;
        for (int k = 0; k <= samples; ++k) {
            const double t = piece.lo + piece.length() * k / samples;
            const NodalField z = sys.basis().to_nodal(adjoint_state(zT.coeffs, sys, t));
            for (auto i : inside) u.observation_sup = std::max(u.observation_sup, std::abs(z[i]));
        }
    }
    u.observation_l1 = observation_integral(zT.coeffs, sys, s, T);
    u.implication_holds = unique_continuation_implication(u.observation_sup, u.terminal_norm, tol, amplification);
    return u;
}

}  // namespace wentzell
