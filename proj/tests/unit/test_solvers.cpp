#include <catch_amalgamated.hpp>

#include <cmath>

#include "core/errors.hpp"
#include "core/solvers.hpp"
#include "fixtures.hpp"

using namespace wentzell;
using Catch::Approx;

namespace {

ControlSignal sample_control(const ModalSystem& sys) {
    ControlSignal u(sys.modes());
    Eigen::VectorXd zeta(3);
    zeta << 1.5, -2.0, 0.75;
    u.add_stage({0.1, 0.9, {0, 1, 2}, zeta});
    return u;
}

// Shape of sample_control from its definition, continued smoothly past the
// stage support; the support enters through the time set given to RK4.
Eigen::VectorXd sample_shape(double t, int modes) {
    const auto& m = fixture::model();
    Eigen::VectorXd c = Eigen::VectorXd::Zero(modes);
    const double zeta[] = {1.5, -2.0, 0.75};
    for (int k = 0; k < 3; ++k)
        c[k] = zeta[k] * std::exp(-m.basis.lambda(k) * (0.9 - t) + oracle::piecewise_integral(m.a, t, 0.9));
    return c;
}

Eigen::VectorXd sample_state(int modes) {
    Eigen::VectorXd y(modes);
    for (int j = 0; j < modes; ++j) y[j] = 1.0 / (1.0 + j);
    return y;
}

}  // namespace

TEST_CASE("zero data gives the zero solution", "[solvers]") {
    const auto sys = fixture::model().system(8);
    const ControlSignal none(8);
    CHECK(none.is_zero());
    const ModeState y0{Eigen::VectorXd::Zero(8), 0.0};
    CHECK(evolve_reduced(y0, none, sys, 1.0).norm() == 0.0);
    const auto fwd = solve_forward(y0, none, sys, BrownianBundle(1, 64, 10, 1.0));
    CHECK(fwd.terminal.coeffs.cwiseAbs().maxCoeff() == 0.0);
    const auto em = solve_forward_em(y0, PathwiseControl{}, sys, BrownianBundle(1, 1024, 10, 1.0));
    CHECK(em.coeffs.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("reduced evolution matches an RK4 reference", "[solvers]") {
    const auto& m = fixture::model();
    const int modes = 6;
    const auto sys = m.system(modes);
    const ControlSignal u = sample_control(sys);
    const ModeState y0{sample_state(modes), 0.0};
    const Eigen::VectorXd exact = evolve_reduced(y0, u, sys, 1.0).coeffs;
    const std::vector<std::pair<double, double>> support{{0.1, 0.45}, {0.55, 0.9}};
    const Eigen::VectorXd ref = oracle::rk4_reduced(y0.coeffs, m.lambdas(modes), m.a, sys.gram(), support,
                                                    [&](double t) { return sample_shape(t, modes); }, 0.0, 1.0,
                                                    20000);
    CHECK((exact - ref).norm() <= 1e-9 * std::max(1.0, ref.norm()));
    // Free evolution is the propagator.
    const Eigen::VectorXd free = evolve_reduced(y0, ControlSignal(modes), sys, 0.7).coeffs;
    for (int j = 0; j < modes; ++j)
        CHECK(free[j] == Approx(y0.coeffs[j] * std::exp(-m.basis.lambda(j) * 0.7 +
                                                       oracle::piecewise_integral(m.a, 0.0, 0.7))));
}

TEST_CASE("trajectory steps compose", "[solvers]") {
    const auto sys = fixture::model().system(6);
    const ControlSignal u = sample_control(sys);
    const ModeState y0{sample_state(6), 0.0};
    const Eigen::MatrixXd traj = reduced_trajectory(y0, u, sys, {0.3, 0.6, 1.0});
    const Eigen::VectorXd direct = evolve_reduced(y0, u, sys, 1.0).coeffs;
    CHECK((traj.col(2) - direct).norm() <= 1e-12 * direct.norm());
}

TEST_CASE("explicit scheme converges to the exact pathwise solution", "[solvers]") {
    const auto sys = fixture::model().system(4);
    const ControlSignal u = sample_control(sys);
    const ModeState y0{sample_state(4), 0.0};
    const BrownianBundle fine(17, 4096, 200, 1.0);
    const ModeEnsemble exact = solve_forward(y0, u, sys, fine).terminal;
    const auto err_fine = strong_error(exact, solve_forward_em(y0, lift_control(u, sys, fine), sys, fine));
    const auto coarse = fine.coarsened(4);
    const auto err_coarse = strong_error(exact, solve_forward_em(y0, lift_control(u, sys, coarse), sys, coarse));
    CHECK(err_fine.rms < err_coarse.rms);
    const double scale = exact.coeffs.norm() / std::sqrt(exact.paths());
    CHECK(err_fine.rms <= 1e-2 * scale);
}

TEST_CASE("convergence study agrees with separate ensemble solves", "[solvers]") {
    const auto sys = fixture::model().system(4);
    const ControlSignal u = sample_control(sys);
    const ModeState y0{sample_state(4), 0.0};
    const BrownianBundle fine(53, 1024, 50, 1.0);
    const auto study = strong_convergence(y0, u, sys, fine, {1, 4}, {StepScheme::euler_maruyama, StepScheme::milstein});
    REQUIRE(study.n_steps == std::vector<int>{1024, 256});
    const ModeEnsemble exact = solve_forward(y0, u, sys, fine).terminal;
    const auto coarse = fine.coarsened(4);
    const auto em = strong_error(exact, solve_forward_em(y0, lift_control(u, sys, coarse), sys, coarse));
    const auto mil = strong_error(
        exact, solve_forward_em(y0, lift_control(u, sys, coarse), sys, coarse, StepScheme::milstein));
    CHECK(study.errors[0][1].mean == Approx(em.mean).epsilon(1e-9));
    CHECK(study.errors[0][1].rms == Approx(em.rms).epsilon(1e-9));
    CHECK(study.errors[1][1].mean == Approx(mil.mean).epsilon(1e-9));
    CHECK(study.errors[0][0].mean < study.errors[0][1].mean);
    CHECK_THROWS_AS(strong_convergence(y0, u, sys, fine, {3}), ArgumentError);
}

TEST_CASE("explicit scheme rejects unstable steps", "[solvers]") {
    const auto sys = fixture::model().system(40);
    const ModeState y0{Eigen::VectorXd::Ones(40), 0.0};
    CHECK_THROWS_AS(solve_forward_em(y0, PathwiseControl{}, sys, BrownianBundle(1, 64, 2, 1.0)), ConfigError);
}

TEST_CASE("pathwise controls are rejected by the exact solver", "[solvers]") {
    const auto sys = fixture::model().system(4);
    const ModeState y0{sample_state(4), 0.0};
    const PathwiseControl u = [](int, int, double) { return Eigen::VectorXd::Zero(4); };
    CHECK_THROWS_AS(solve_forward(y0, u, sys, BrownianBundle(1, 64, 2, 1.0)), UnsupportedError);
}

TEST_CASE("energy of the solution is bounded by the data", "[solvers]") {
    const auto sys = fixture::model().system(6);
    const ControlSignal u = sample_control(sys);
    const ModeState y0{sample_state(6), 0.0};
    const auto rep = energy_ratio(y0, u, sys, BrownianBundle(23, 1024, 500, 1.0), 8);
    CHECK(rep.data_norm == Approx(y0.coeffs.squaredNorm() + std::pow(u.linf_norm(sys), 2)));
    CHECK(std::isfinite(rep.ratio));
    CHECK(rep.ratio > 0.0);
    CHECK(rep.ratio <= std::exp(2.0));
}

TEST_CASE("backward solution has zero Z for deterministic data", "[solvers]") {
    const auto sys = fixture::model().system(8);
    const ModeState zT{sample_state(8), 1.0};
    const auto sol = solve_backward(zT, sys, 0.0, 256);
    CHECK(sol.Z.cwiseAbs().maxCoeff() == 0.0);
    CHECK(adjoint_residual(sol, sys) <= 1e-12);
    CHECK((sol.z.col(sol.z.cols() - 1) - zT.coeffs).norm() == 0.0);
    CHECK((sol.z.col(0) - adjoint_state(zT.coeffs, sys, 0.0)).norm() <= 1e-14);
}

TEST_CASE("second-chaos terminal data is unsupported", "[solvers]") {
    const auto sys = fixture::model().system(3);
    ChaosTerminal second{{Eigen::VectorXd::Ones(3), Eigen::VectorXd::Zero(3), Eigen::VectorXd::Ones(3)}};
    CHECK_THROWS_AS(second.check_supported(), UnsupportedError);
    CHECK_THROWS_AS(solve_backward(second, sys, 0.0, 16), UnsupportedError);
    ChaosTerminal first{{Eigen::VectorXd::Ones(3), Eigen::VectorXd::Ones(3)}};
    CHECK_NOTHROW(first.check_supported());
    CHECK_THROWS_AS(solve_backward(first, sys, 0.0, 16), UnsupportedError);
}

TEST_CASE("exact duality closes to rounding", "[solvers]") {
    const auto sys = fixture::model().system(8);
    const ControlSignal u = sample_control(sys);
    const ModeState y0{sample_state(8), 0.0};
    Eigen::VectorXd z(8);
    z << 0.3, -1.0, 0.5, 0.2, 0.0, 0.1, -0.4, 0.25;
    const auto rep = check_duality(y0, u, ModeState{z, 1.0}, sys);
    CHECK(rep.residual <= 1e-10);
    CHECK(std::abs(rep.rhs) > 1e-3);
}

TEST_CASE("monte carlo duality holds in mean for first-chaos data", "[solvers]") {
    const auto sys = fixture::model().system(6);
    const ControlSignal u = sample_control(sys);
    const ModeState y0{sample_state(6), 0.0};
    ChaosTerminal zT{{sample_state(6), Eigen::VectorXd::Constant(6, 0.5)}};
    const auto rep = check_duality(y0, u, zT, sys, BrownianBundle(31, 512, 4000, 1.0));
    CHECK(rep.monte_carlo);
    CHECK(rep.paths == 4000);
    CHECK(std::abs(rep.difference_mean) <= 3.0 * rep.difference_se + 1e-12);
}

TEST_CASE("regressed Z recovers the analytic martingale integrand", "[solvers]") {
    const auto sys = fixture::model().system(3);
    ChaosTerminal zT{{Eigen::VectorXd::Ones(3), (Eigen::VectorXd(3) << 1.0, -0.5, 2.0).finished()}};
    const auto mc = solve_backward_mc(zT, sys, BrownianBundle(41, 256, 4000, 1.0), 6);
    REQUIRE(mc.regression_steps.size() == 6);
    for (std::size_t i = 0; i < mc.regression_steps.size(); ++i) {
        const int k = mc.regression_steps[i];
        for (int j = 0; j < 3; ++j) {
            const auto col = static_cast<Eigen::Index>(i);
            // E[(z_{k+1} - z_k) dW] = Z(t_{k+1}) dt holds exactly for first-chaos data.
            CHECK(std::abs(mc.Z_regressed(j, col) - mc.Z(j, k + 1)) <= 4.0 * mc.Z_regressed_se(j, col));
        }
    }
}
