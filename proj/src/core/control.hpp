#pragma once

#include <Eigen/Dense>
#include <limits>
#include <string>
#include <vector>

#include "core/noise.hpp"
#include "core/solvers.hpp"
#include "core/stats.hpp"

namespace wentzell {

/// Gramian of the window modes on (t_a, t_b):
/// Lambda_ij = G_ij ∫_{E ∩ (t_a, t_b)} e_i e_j dt, e_j(t) = exp(-lambda_j (t_b - t) + ∫_t^{t_b} a).
/// Symmetric by construction; sigma_min = 0 flags a degenerate window.
struct HumGramian {
    std::vector<int> modes;
    double t_a = 0.0;
    double t_b = 0.0;
    Eigen::MatrixXd matrix;
    double sigma_min = 0.0;
    double sigma_max = 0.0;

    int size() const { return static_cast<int>(modes.size()); }
};

/// Solves with a Gramian are rejected below this smallest eigenvalue.
inline constexpr double kGramianFloor = 1e-12;

/// bsq_weight = 1 gives the E M^2 weighted Gramian used for expected costs.
HumGramian build_gramian(const std::vector<int>& modes, double t_a, double t_b, const ModalSystem& sys,
                         double bsq_weight = 0.0);

/// Window {j : lambda_j <= r} among the system's modes. Throws ArgumentError if empty.
std::vector<int> window_modes(const ModalSystem& sys, double r);

struct PartialNullControl {
    ControlSignal signal;
    HumGramian gramian;
    Eigen::VectorXd zeta;
    Eigen::VectorXd free_terminal;  // reduced free evolution at t_b
};

/// Control on (t_a, t_b) with Pi_window ytilde(t_b) = 0, where y is the reduced
/// state given at y.time <= t_a. Solves Lambda zeta = -f with f the window
/// part of the free evolution at t_b. Throws NumericError when
/// sigma_min(Lambda) < kGramianFloor.
PartialNullControl partial_null_control(const ModeState& y, const std::vector<int>& modes, double t_a, double t_b,
                                        const ModalSystem& sys);

/// Largest expected cost E ∫ |u|^2 over unit initial states for the partial
/// null control of the window on (t_a, t_b) from time 0.
double worst_case_cost(const std::vector<int>& modes, double t_a, double t_b, const ModalSystem& sys);

struct CostSweep {
    std::vector<double> windows;  // r values
    std::vector<int> mode_counts;
    std::vector<double> costs;
    std::vector<double> sigma_min;
    LineFit log_cost_fit;  // log(cost) against sqrt(r)
};

/// Worst-case cost for windows covering 1..max_modes modes on (t_a, t_b).
CostSweep cost_sweep(const ModalSystem& sys, double t_a, double t_b, int max_modes);

struct Schedule {
    double initial_window = 0.0;  // r_0; 0 selects lambda_2
    double growth = 4.0;          // r_{k+1} = growth * r_k
    double control_fraction = 0.5;  // share of each stage's E-mass used for control
    int max_stages = 12;
    double tolerance = 1e-6;  // target E|y(T)|^2 / |y0|^2
};

/// One stage [begin, end]: control on [begin, control_end], free decay after.
struct PlanStage {
    double begin = 0.0;
    double control_end = 0.0;
    double end = 0.0;
    double window = 0.0;
    std::vector<int> modes;
    double sigma_min = 0.0;
    // Filled by realize_plan.
    Eigen::VectorXd zeta;
    double window_residual = 0.0;  // |Pi_window ytilde(control_end)|
    double high_before = 0.0;      // |Pi_perp ytilde(control_end)|
    double high_after = 0.0;       // |Pi_perp ytilde(end)|
    double decay_bound = 0.0;      // exp((-r_k + |a|_inf)(end - control_end)) high_before

    bool decay_holds() const { return high_after <= decay_bound * (1.0 + 1e-12) + 1e-300; }
};

struct PlanLayout {
    Schedule schedule;
    std::vector<PlanStage> stages;
};

/// Stages tile (0, T): stage k ends where the cumulative E-mass reaches
/// m(E)(1 - 2^{-(k+1)}), the last stage ends at T. Windows r_k = r_0 growth^k.
PlanLayout plan_layout(const ModalSystem& sys, const Schedule& schedule, int stages);

struct ControlPlan {
    Schedule schedule;
    std::vector<PlanStage> stages;
    ControlSignal signal{0};
    double predicted_cost = 0.0;            // E ∫ |u|^2
    double predicted_terminal = 0.0;        // E |y(T)|^2 from the reduced state
    double initial_norm = 0.0;
    double achieved_terminal_norm = std::numeric_limits<double>::quiet_NaN();  // set after simulation
    ModeState reduced_terminal;
};

/// Sequential partial null controls along a fixed layout.
ControlPlan realize_plan(const PlanLayout& layout, const ModeState& y0, const ModalSystem& sys);

/// Fewest stages whose last window covers the largest active mode of y0, then
/// more stages until the predicted E|y(T)|^2 <= tolerance |y0|^2. Throws
/// ConfigError with diagnostics when max_stages does not suffice.
ControlPlan lebeau_robbiano_plan(const ModeState& y0, const ModalSystem& sys, const Schedule& schedule);

/// Bounds C with |u(y0)| <= C |y0| for every y0 on a fixed layout, from the
/// controls of the unit mode vectors: C = (sum_j |u(e_j)|^2)^{1/2}.
struct ControlBound {
    double linf = 0.0;  // L^inf_F(0,T; L2(Omega; L2(G))) norm
    double l2 = 0.0;    // (E ∫ |u|^2)^{1/2}
};

ControlBound control_bound(const PlanLayout& layout, const ModalSystem& sys);

/// Minimizer of J(zeta) = 1/2 zeta' Lambda zeta + eps |zeta| + <g, zeta> over
/// the whole window on (0, T), where g is the free-evolution gap. With
/// zeta = -nu (I + nu Lambda)^{-1} g the terminal gap is (I + nu Lambda)^{-1} g,
/// and nu solves |gap(nu)| = eps by Newton's method from nu = 0, which
/// approaches the root from below so the gap never increases.
struct ApproximateControl {
    ControlSignal signal{0};
    Eigen::VectorXd zeta;
    Eigen::VectorXd free_gap;
    double nu = 0.0;
    double gap = 0.0;
    std::vector<double> gap_history;
    double cost = 0.0;              // E ∫ |u|^2
    double noise_moment = 1.0;      // E M(T)^2
    double stochastic_distance = 0.0;  // gap (E M(T)^2)^{1/2}
    double sigma_min = 0.0;
};

/// Throws MeasureConditionError unless m((s, T) ∩ E) > 0 for every s < T.
ApproximateControl approximate_control(const ModeState& y0, const ModeState& target, double eps,
                                       const ModalSystem& sys, int max_iterations = 500);

/// Adjoint solution z = phi psi_1 on (s0, T), zero before s0, with xi = 1 and
/// d phi = (lambda_1 - a) phi dt - b dt + dW, phi(s0) = 0.
struct CounterexampleWitness {
    double s0 = 0.0;
    double horizon = 0.0;
    double xi = 1.0;
    std::vector<double> times;        // grid from s0 to T
    Eigen::MatrixXd sample_paths;     // kept paths x times
    Eigen::VectorXd terminal;         // phi(T) per path
    double mean = 0.0;                // closed form E phi(T)
    double variance = 0.0;            // closed form Var phi(T)
    double terminal_second_moment = 0.0;  // mean^2 + variance
    double mc_second_moment = 0.0;
    double mc_standard_error = 0.0;
    double observation_norm = 0.0;    // ∫ chi_E |z|_{L2(G0)}, structurally 0
    double initial_norm = 0.0;        // max over paths |z(s0)|
    long paths = 0;
};

/// Throws ArgumentError when m((s0, T) ∩ E) > 0 or s0 is off the bundle grid.
CounterexampleWitness build_counterexample(const ModalSystem& sys, double s0, const BrownianBundle& bundle,
                                           int kept_paths = 4);

}  // namespace wentzell
