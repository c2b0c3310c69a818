#pragma once

#include <Eigen/Dense>
#include <functional>
#include <optional>
#include <vector>

#include "core/noise.hpp"
#include "core/system.hpp"

namespace wentzell {

/// A deterministic state in eigenmode coordinates; |state| in the weighted
/// norm equals the Euclidean norm of `coeffs`.
struct ModeState {
    Eigen::VectorXd coeffs;
    double time = 0.0;

    double norm() const { return coeffs.norm(); }
};

/// Random states, one column per path.
struct ModeEnsemble {
    Eigen::MatrixXd coeffs;
    double time = 0.0;

    int paths() const { return static_cast<int>(coeffs.cols()); }
};

/// Control shape on [begin, end]: c_k(t) = zeta_k e_k(t) for each listed mode,
/// e_k(t) = exp(-lambda_k (end - t) + ∫_t^end a). The control field is
/// v(t) = chi_E(t) sum_k c_k(t) psi_k restricted to G0.
struct ExponentialStage {
    double begin = 0.0;
    double end = 0.0;
    std::vector<int> modes;
    Eigen::VectorXd zeta;
};

/// Shape coefficients sampled on a uniform time grid, linear in between.
struct GriddedProfile {
    double t0 = 0.0;
    double dt = 0.0;
    Eigen::MatrixXd shape;  // modes x samples

    int steps() const { return static_cast<int>(shape.cols()) - 1; }
    double t1() const { return t0 + dt * steps(); }
    Eigen::VectorXd at(double t) const;
};

/// One piece of control support inside a time step: the measure of
/// E ∩ step ∩ piece and the unrestricted shape at the step ends.
struct StepPiece {
    double weight = 0.0;
    Eigen::VectorXd left;
    Eigen::VectorXd right;
};

/// Deterministic profile v of an M-factored control u(t) = M(t) v(t).
///
/// The control acts through the G0 Gram matrix: the load on mode j is
/// l_j(t) = chi_E(t) sum_k G_jk c_k(t).
class ControlSignal {
public:
    explicit ControlSignal(int modes) : modes_(modes) {}

    int modes() const { return modes_; }
    const std::vector<ExponentialStage>& stages() const { return stages_; }
    const std::optional<GriddedProfile>& profile() const { return profile_; }
    bool is_zero() const;

    void add_stage(ExponentialStage stage);
    void set_profile(GriddedProfile profile);

    /// Shape ignoring chi_E.
    Eigen::VectorXd raw_shape(double t, const ModalSystem& sys) const;
    /// chi_E(t) times the raw shape.
    Eigen::VectorXd shape(double t, const ModalSystem& sys) const;

    std::vector<StepPiece> step_pieces(double t0, double t1, const ModalSystem& sys) const;

    /// |v(t)|_{L2(G)} with chi_E.
    double field_norm(double t, const ModalSystem& sys) const;
    /// sup_t |v(t)|_{L2(G)} (E M(t)^2)^{1/2}, the L^inf_F(0,T; L2(Omega; L2(G))) norm of u.
    double linf_norm(const ModalSystem& sys) const;
    /// E ∫_0^T |u(t)|^2_{L2(G)} dt.
    double l2_cost(const ModalSystem& sys) const;

private:
    int modes_;
    std::vector<ExponentialStage> stages_;
    std::optional<GriddedProfile> profile_;
};

/// Exact evolution of the reduced state y/M from y.time to t1 (stages in
/// closed form, gridded profiles by the trapezoidal rule on their grid).
ModeState evolve_reduced(const ModeState& y, const ControlSignal& u, const ModalSystem& sys, double t1);

/// Reduced states at the given increasing times (first time >= y0.time).
Eigen::MatrixXd reduced_trajectory(const ModeState& y0, const ControlSignal& u, const ModalSystem& sys,
                                   const std::vector<double>& times);

struct ForwardResult {
    ModeState reduced;       // y(T) / M(T), deterministic
    Eigen::VectorXd factor;  // M(T) per path
    ModeEnsemble terminal;   // y(T) per path
};

/// Pathwise exact terminal state y(T) = M(T) * reduced(T).
ForwardResult solve_forward(const ModeState& y0, const ControlSignal& u, const ModalSystem& sys,
                            const BrownianBundle& bundle);

/// Adapted control on the step grid: returns the shape integrated over
/// step k, i.e. ∫_{t_k}^{t_{k+1}} chi_E u dt as mode coefficients, given
/// the path index and M(t_k) on that path.
using PathwiseControl = std::function<Eigen::VectorXd(int path, int step, double factor)>;

/// Exists to reject non-factored controls; always throws UnsupportedError.
[[noreturn]] ForwardResult solve_forward(const ModeState& y0, const PathwiseControl& u, const ModalSystem& sys,
                                         const BrownianBundle& bundle);

/// Lifted control u = M v on the bundle's step grid.
PathwiseControl lift_control(const ControlSignal& v, const ModalSystem& sys, const BrownianBundle& bundle);

enum class StepScheme { euler_maruyama, milstein };

/// Explicit scheme on mode coefficients with left-point coefficients.
/// Throws ConfigError if a coefficient breakpoint is off the step grid or
/// lambda_max dt > 2.
ModeEnsemble solve_forward_em(const ModeState& y0, const PathwiseControl& u, const ModalSystem& sys,
                              const BrownianBundle& bundle, StepScheme scheme = StepScheme::euler_maruyama);

/// One path of the explicit scheme, every grid time (modes x (n_steps + 1)).
Eigen::MatrixXd em_trajectory(const ModeState& y0, const PathwiseControl& u, const ModalSystem& sys,
                              const BrownianBundle& bundle, int path,
                              StepScheme scheme = StepScheme::euler_maruyama);

struct StrongError {
    double mean = 0.0;          // E |y - y_ref|
    double rms = 0.0;           // (E |y - y_ref|^2)^{1/2}
    double standard_error = 0.0;
    double max_relative = 0.0;  // max over paths of |y - y_ref| / |y_ref|
};

StrongError strong_error(const ModeEnsemble& reference, const ModeEnsemble& approx);

/// Strong errors of the explicit schemes against the exact pathwise solution,
/// with one draw of fine increments per path shared by every step size.
/// Step size i uses fine.dt() * factors[i]; errors[s][i] is scheme s at size i.
struct ConvergenceStudy {
    std::vector<StepScheme> schemes;
    std::vector<int> n_steps;
    std::vector<std::vector<StrongError>> errors;
};

ConvergenceStudy strong_convergence(const ModeState& y0, const ControlSignal& u, const ModalSystem& sys,
                                    const BrownianBundle& fine, const std::vector<int>& factors,
                                    const std::vector<StepScheme>& schemes = {StepScheme::euler_maruyama});

/// E max_t |y(t)|^2 / (|y0|^2 + |u|^2_inf) sampled every `stride` steps.
struct EnergyReport {
    double expected_max_energy = 0.0;
    double standard_error = 0.0;
    double data_norm = 0.0;  // |y0|^2 + |u|^2_inf
    double ratio = 0.0;
};

EnergyReport energy_ratio(const ModeState& y0, const ControlSignal& u, const ModalSystem& sys,
                          const BrownianBundle& bundle, int stride);

/// Adjoint state on a backward grid; Z is identically zero for
/// deterministic terminal data.
struct AdjointSolution {
    std::vector<double> times;
    Eigen::MatrixXd z;  // modes x times
    Eigen::MatrixXd Z;  // modes x times
    ModeState terminal;
};

/// z_j(t) = zT_j exp(-lambda_j (T - t) + ∫_t^T a).
Eigen::VectorXd adjoint_state(const Eigen::VectorXd& zT, const ModalSystem& sys, double t);

/// Closed form on n_steps uniform steps of [s, T]. With deterministic data
/// and coefficients, the pair (z, 0) satisfies the mode equations, so by
/// uniqueness it is the solution.
AdjointSolution solve_backward(const ModeState& zT, const ModalSystem& sys, double s, int n_steps);

/// Largest |z_j(t_k) - exp(-lambda_j dt + ∫ a) z_j(t_{k+1})| relative to max |z|.
double adjoint_residual(const AdjointSolution& sol, const ModalSystem& sys);

/// Terminal data sum_p coefficients[p] W(T)^p per mode. Only p <= 1 is
/// supported.
struct ChaosTerminal {
    std::vector<Eigen::VectorXd> coefficients;

    int modes() const { return coefficients.empty() ? 0 : static_cast<int>(coefficients.front().size()); }
    /// Throws UnsupportedError for nonzero terms of order >= 2.
    void check_supported() const;
    bool deterministic() const;
    Eigen::VectorXd c0() const;
    Eigen::VectorXd c1() const;
    Eigen::VectorXd at(double w_terminal) const;
};

/// Throws UnsupportedError unless the data is deterministic, then defers to
/// the closed form.
AdjointSolution solve_backward(const ChaosTerminal& zT, const ModalSystem& sys, double s, int n_steps);

/// Adjoint for first-chaos terminal data c0 + c1 W(T) on the bundle grid:
/// z_j(t) = e_j(t) [c0_j + c1_j (W(t) + ∫_t^T b)], Z_j(t) = e_j(t) c1_j.
/// Z is also recovered by regressing (Δz ΔW / dt) on {1, W(t_k)} across paths.
struct BackwardMcResult {
    std::vector<double> times;
    Eigen::MatrixXd weight;  // e_j(t_k), modes x (n_steps + 1)
    Eigen::VectorXd shift;   // ∫_{t_k}^T b
    ChaosTerminal terminal;
    Eigen::MatrixXd Z;       // analytic, modes x (n_steps + 1)
    std::vector<int> regression_steps;
    Eigen::MatrixXd Z_regressed;     // modes x regression_steps, intercept + slope * mean W
    Eigen::MatrixXd Z_regressed_se;  // standard error of the regressed mean
    Eigen::MatrixXd Z_slope;         // coefficient on W(t_k)

    Eigen::VectorXd z_at(int step, double w) const;
};

BackwardMcResult solve_backward_mc(const ChaosTerminal& zT, const ModalSystem& sys, const BrownianBundle& bundle,
                                   int regression_points);

/// Both sides of E<y(T), zT> - <y0, z(0)> = E ∫ chi_E chi_G0 u z dx dt.
struct DualityReport {
    bool monte_carlo = false;
    double lhs = 0.0;
    double rhs = 0.0;
    double residual = 0.0;  // |lhs - rhs| / max(|lhs|, |rhs|, 1)
    double difference_mean = 0.0;
    double difference_se = 0.0;
    long paths = 0;
};

/// Deterministic terminal data: E M = 1 closes both sides exactly.
DualityReport check_duality(const ModeState& y0, const ControlSignal& u, const ModeState& zT,
                            const ModalSystem& sys);

/// First-chaos terminal data: pathwise sides on the bundle, compared in mean.
DualityReport check_duality(const ModeState& y0, const ControlSignal& u, const ChaosTerminal& zT,
                            const ModalSystem& sys, const BrownianBundle& bundle);

}  // namespace wentzell
