#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "core/solvers.hpp"
#include "core/stats.hpp"

namespace wentzell {

/// Both sides of E|E_r^perp z(t)|^2 <= exp((-2r + delta)(T - t)) E|zT|^2.
struct DecayCheck {
    double lhs = 0.0;
    double rhs = 0.0;
    bool holds() const { return lhs <= rhs; }
};

DecayCheck check_highmode_decay(const ModeState& zT, double r, double t, const ModalSystem& sys);

/// One evaluation of the interpolation ratio
/// |z(t)|^2 / (|z(t)|_{L2(G0)} |zT|) and of A = |z(t)|_{L2(G0)} / |zT|.
struct InterpolationSample {
    double t = 0.0;
    double state_energy = 0.0;
    double g0_norm = 0.0;
    double terminal_norm = 0.0;
    double ratio = 0.0;  // +inf when the G0 observation vanishes for a nonzero state
    double ratio_a = 0.0;
};

InterpolationSample check_interpolation(const ModeState& zT, double t, const ModalSystem& sys);

/// Sweep over times and random terminal states. `worst` holds the largest
/// ratio at each time. `dominating_constant` is the least C with
/// C exp(C / (T - t)) >= worst(t) for every sampled t; `a_bound` is the
/// energy-bound constant exp(|a|_inf T) dominating A.
struct InterpolationProfile {
    std::vector<double> times;
    std::vector<double> worst;
    std::vector<InterpolationSample> samples;
    LineFit log_ratio_fit;  // log(worst) against 1 / (T - t)
    double dominating_constant = 0.0;
    double a_max = 0.0;
    double a_bound = 0.0;
};

InterpolationProfile interpolation_sweep(const ModalSystem& sys, const std::vector<double>& times, int states,
                                         std::uint64_t seed);

/// Least C > 0 with log C + C x_i >= y_i for all i.
double dominating_constant(const std::vector<double>& x, const std::vector<double>& y);

/// Time sequence t_1 < t_2 < ... < t_tilde inside one component of E ∩ (s, T)
/// with geometric gaps d_{i+1} = rho d_i, truncated once a gap drops below dt.
struct SlicingSequence {
    double s = 0.0;
    double c_fit = 0.0;
    double rho = 0.0;
    double dt = 0.0;
    Interval component;
    double t_tilde = 0.0;
    std::vector<double> times;  // t_1 .. t_{n+1}
    std::vector<double> etas;   // eta_i = t_{i+1} - (t_{i+1} - t_i) / 6, i = 1..n
    int truncation = 0;         // n, the number of retained gaps

    double gap(int i) const { return times[static_cast<std::size_t>(i) + 1] - times[static_cast<std::size_t>(i)]; }
};

/// Throws MeasureConditionError when m((s, T) ∩ E) = 0.
SlicingSequence build_slicing(const TimeSet& time_set, double s, double c_fit, double dt);

/// Post-hoc verification with outward-rounded measures: a property passes
/// only if it holds for every value inside the rounding enclosure.
struct SlicingCheck {
    bool p2 = true;
    bool p3 = true;
    bool inemes = true;
    bool monotone = true;
    double worst_p2_ratio = std::numeric_limits<double>::infinity();      // min m(E ∩ slice) / gap
    double worst_inemes_ratio = std::numeric_limits<double>::infinity();  // min m(E ∩ (t_i, eta_i)) / gap
    double worst_p3_defect = 0.0;                                         // max |d_{i+1} - rho d_i| in ulps
    bool ok() const { return p2 && p3 && inemes && monotone; }
};

SlicingCheck verify_slicing(const SlicingSequence& seq, const TimeSet& time_set);

/// Observation functional ∫_{E ∩ (p, q)} |z(t)|_{L2(G0)} dt for z(t) = e(t) ∘ zT,
/// by composite Gauss-Legendre panels graded toward each component's right end.
double observation_integral(const Eigen::VectorXd& zT, const ModalSystem& sys, double p, double q);

/// The slice chain of the observability proof for one terminal state, with
/// Lambda_i = |z(t_i)|, d_i = t_{i+1} - t_i, m_i = m(E ∩ (t_i, eta_i)),
/// obs_i = ∫_{E ∩ (t_i, eta_i)} |z|_{G0} and eps_i = exp(-1 / (2 d_i)):
///   slice:   Lambda_i^2 <= C e^{C/d_i} |z(t)|_{G0} Lambda_{i+1} for t in E ∩ (t_i, eta_i)
///   chain:   e^{-(C+1/2)/d_i} Lambda_i <= e^{-(C+1/2)/d_{i+1}} Lambda_{i+1} + (C/m_i) obs_i
///   final:   |z(t_1)|^2 <= e^{(2C+1)/d_1} (e^{-(C+1/2)/d_{n+1}} Lambda_{n+1} + sum_i (C/m_i) obs_i)^2
///   energy:  |z(s)|^2 <= e^{2|a|_inf (t_1 - s)} |z(t_1)|^2
/// The chain follows from the slice inequality with rho = (C+1/2)/(C+1);
/// the final bound is the chain summed over the retained slices, whose tail
/// term vanishes as the sequence accumulates at t_tilde. Inequalities are
/// compared in log space.
struct TelescopingCheck {
    bool slice = true;
    bool chain = true;
    bool final_bound = true;
    bool energy_transfer = true;
    double final_lhs = 0.0;
    double final_log_rhs = 0.0;
    double energy_lhs = 0.0;
    double energy_rhs = 0.0;
    bool ok() const { return slice && chain && final_bound && energy_transfer; }
};

TelescopingCheck check_telescoping(const Eigen::VectorXd& zT, const SlicingSequence& seq, const ModalSystem& sys,
                                   double c);

/// Least C for which the slice inequality holds on every retained slice for
/// every listed terminal state.
double slice_constant(const std::vector<Eigen::VectorXd>& states, const SlicingSequence& seq,
                      const ModalSystem& sys);

enum class ObservabilityRegime { holds, fails };

struct RatioSample {
    int id = 0;
    double lhs = 0.0;
    double rhs = 0.0;
    double ratio = 0.0;
};

/// Multi-start estimate of sup |z(s)|^2 / (∫_{E ∩ (s,T)} |z(t)|_{G0} dt)^2
/// over terminal states in the span of the system's modes.
struct ObservabilityReport {
    double constant_estimate = 0.0;
    std::vector<RatioSample> samples;
    ObservabilityRegime regime = ObservabilityRegime::holds;
    std::optional<Eigen::VectorXd> witness;
    Eigen::VectorXd maximizer;
    std::string config_digest;
};

ObservabilityReport estimate_observability_constant(const ModalSystem& sys, double s, int n_samples,
                                                    std::uint64_t seed);

/// Observation of an adjoint state on E x G0 and the unique-continuation
/// implication "observation <= tol  ==>  |zT| <= tol * amplification".
struct UniqueContinuation {
    double observation_sup = 0.0;  // sup over E x G0 nodes of |z|
    double observation_l1 = 0.0;   // ∫ chi_E |z|_{L2(G0)} dt
    double terminal_norm = 0.0;
    bool implication_holds = true;
};

UniqueContinuation check_unique_continuation(const ModeState& zT, const ModalSystem& sys,
                                             const ControlRegion& g0, double s, double tol,
                                             double amplification);

/// Same implication for an observation already computed elsewhere.
bool unique_continuation_implication(double observation, double terminal_norm, double tol, double amplification);

}  // namespace wentzell
