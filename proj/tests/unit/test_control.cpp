#include <catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "core/control.hpp"
#include "core/errors.hpp"
#include "fixtures.hpp"

using namespace wentzell;
using Catch::Approx;

namespace {

const std::vector<std::pair<double, double>> kWholeHorizon{{0.0, 1.0}};

Eigen::VectorXd random_state(int m, std::mt19937_64& rng) {
    std::normal_distribution<double> n01;
    Eigen::VectorXd v(m);
    for (int j = 0; j < m; ++j) v[j] = n01(rng);
    return v;
}

std::vector<int> first_modes(int n) {
    std::vector<int> v(static_cast<std::size_t>(n));
    for (int j = 0; j < n; ++j) v[static_cast<std::size_t>(j)] = j;
    return v;
}

}  // namespace

TEST_CASE("single-mode gramian has the closed form", "[control]") {
    const auto& m = fixture::model();
    const auto sys = m.system(1, kWholeHorizon, CoefficientPair::constant(1.0, 0.0, 0.0));
    const auto lam = build_gramian({0}, 0.0, 1.0, sys);
    // e_1 = 1 when lambda_1 = 0 and a = 0, and the constant mode has G_11 = m(G0) / (L + 2).
    CHECK(lam.matrix(0, 0) == Approx(0.7 / 3.0).epsilon(1e-10));
}

TEST_CASE("gramian matches fine Simpson quadrature", "[control]") {
    const auto& m = fixture::model();
    const auto sys = m.system(8);
    const auto lam = build_gramian(first_modes(8), 0.0, 1.0, sys);
    const Eigen::MatrixXd ref = oracle::gramian(sys.gram(), m.lambdas(8), m.a, m.e, 0.0, 1.0, 1000000);
    CHECK((lam.matrix - ref).cwiseAbs().maxCoeff() <= 1e-9 * ref.cwiseAbs().maxCoeff());
    CHECK((lam.matrix - lam.matrix.transpose()).cwiseAbs().maxCoeff() == 0.0);
    const auto sub = build_gramian(first_modes(4), 0.0, 1.0, sys);
    CHECK((sub.matrix - lam.matrix.topLeftCorner(4, 4)).cwiseAbs().maxCoeff() <=
          1e-15 * lam.matrix.cwiseAbs().maxCoeff());
    Eigen::LLT<Eigen::MatrixXd> llt(lam.matrix);
    CHECK(llt.info() == Eigen::Success);
    CHECK(lam.sigma_min > 0.0);
    CHECK(lam.sigma_min <= lam.sigma_max);
}

TEST_CASE("partial null control of a zero state is zero", "[control]") {
    const auto sys = fixture::model().system(8);
    const auto pc = partial_null_control(ModeState{Eigen::VectorXd::Zero(8), 0.0}, first_modes(4), 0.0, 1.0, sys);
    CHECK(pc.zeta.cwiseAbs().maxCoeff() == 0.0);
    CHECK(pc.signal.l2_cost(sys) == 0.0);
}

TEST_CASE("partial null control clears the window on every path", "[control]") {
    const auto sys = fixture::model().system(8);
    std::mt19937_64 rng(5);
    const ModeState y0{random_state(8, rng), 0.0};
    const auto window = first_modes(4);
    const auto pc = partial_null_control(y0, window, 0.0, 1.0, sys);
    const auto fwd = solve_forward(y0, pc.signal, sys, BrownianBundle(13, 1024, 1000, 1.0));
    double worst = 0.0;
    for (int p = 0; p < fwd.terminal.paths(); ++p)
        worst = std::max(worst, fwd.terminal.coeffs.col(p).head(4).norm() / y0.coeffs.norm());
    CHECK(worst <= 1e-8);
    CHECK(fwd.terminal.coeffs.bottomRows(4).cwiseAbs().maxCoeff() > 0.0);
}

TEST_CASE("single-mode null control has the closed-form coefficient", "[control]") {
    const auto& m = fixture::model();
    const auto sys = m.system(1, kWholeHorizon, CoefficientPair::constant(1.0, 0.0, 0.3));
    const ModeState y0{Eigen::VectorXd::Constant(1, 2.0), 0.0};
    const auto pc = partial_null_control(y0, {0}, 0.0, 1.0, sys);
    CHECK(pc.zeta[0] == Approx(-2.0 * 3.0 / (0.7 * 1.0)).epsilon(1e-10));
    const auto fwd = solve_forward(y0, pc.signal, sys, BrownianBundle(3, 256, 100, 1.0));
    CHECK(fwd.terminal.coeffs.cwiseAbs().maxCoeff() <= 1e-10);
}

TEST_CASE("ill-posed windows are rejected", "[control]") {
    const auto& m = fixture::model();
    // G0 covering one cell sees the modes through two nodal values and a
    // short interval leaves the exponentials nearly parallel, so the
    // Gramian, a Hadamard product of the two Gram matrices, is nearly singular.
    const ControlRegion narrow(m.domain, IntervalSet::single(0.5, 0.5078125));
    const ModalSystem sys(m.basis, narrow, m.time_set(m.e), m.coefficients, 8);
    const auto window = first_modes(8);
    CHECK(build_gramian(window, 0.999, 1.0, sys).sigma_min < kGramianFloor);
    CHECK_THROWS_AS(partial_null_control(ModeState{Eigen::VectorXd::Ones(8), 0.0}, window, 0.999, 1.0, sys),
                    NumericError);
    CHECK_THROWS_AS(worst_case_cost(window, 0.999, 1.0, sys), NumericError);
    CHECK_THROWS_AS(window_modes(sys, -1.0), ArgumentError);
}

TEST_CASE("stage plans decay between controls and meet the tolerance", "[control]") {
    const auto& m = fixture::model();
    const auto sys = m.system(16, kWholeHorizon, m.coefficients);
    std::mt19937_64 rng(17);
    for (int trial = 0; trial < 3; ++trial) {
        const ModeState y0{random_state(16, rng), 0.0};
        const auto plan = lebeau_robbiano_plan(y0, sys, Schedule{});
        CHECK(plan.predicted_terminal <= 1e-6 * y0.coeffs.squaredNorm());
        CHECK(plan.predicted_terminal ==
              Approx(plan.reduced_terminal.coeffs.squaredNorm() * noise_second_moment(sys.coefficients(), 1.0))
                  .margin(1e-300));
        for (const auto& st : plan.stages) {
            CHECK(st.decay_holds());
            CHECK(st.window_residual <= 1e-8 * y0.coeffs.norm());
            CHECK(st.begin < st.control_end);
            CHECK(st.control_end <= st.end);
        }
        CHECK(plan.stages.back().end == 1.0);
        for (std::size_t k = 1; k < plan.stages.size(); ++k) {
            CHECK(plan.stages[k].begin == plan.stages[k - 1].end);
            CHECK(plan.stages[k].window == Approx(4.0 * plan.stages[k - 1].window));
        }
        CHECK(plan.predicted_cost == Approx(plan.signal.l2_cost(sys)));
    }
}

TEST_CASE("a plan for the constant mode needs one stage", "[control]") {
    const auto sys = fixture::model().system(16);
    Eigen::VectorXd y = Eigen::VectorXd::Zero(16);
    y[0] = 1.0;
    const auto plan = lebeau_robbiano_plan(ModeState{y, 0.0}, sys, Schedule{});
    REQUIRE(plan.stages.size() == 1);
    CHECK(plan.stages[0].window_residual <= 1e-10);
    CHECK(plan.predicted_terminal <= 1e-6);
}

TEST_CASE("too few stages is a configuration error", "[control]") {
    const auto sys = fixture::model().system(16);
    Eigen::VectorXd y = Eigen::VectorXd::Zero(16);
    y[2] = 1.0;
    // One stage controls only lambda <= lambda_2; free decay of mode 3 cannot reach 1e-40.
    Schedule tight;
    tight.max_stages = 1;
    tight.tolerance = 1e-40;
    CHECK_THROWS_AS(lebeau_robbiano_plan(ModeState{y, 0.0}, sys, tight), ConfigError);
    tight.max_stages = 12;
    CHECK(lebeau_robbiano_plan(ModeState{y, 0.0}, sys, tight).predicted_terminal <= 1e-40);
    Schedule bad;
    bad.growth = 1.0;
    CHECK_THROWS_AS(plan_layout(sys, bad, 3), ConfigError);
}

TEST_CASE("control bound dominates controls of random states", "[control]") {
    const auto sys = fixture::model().system(12);
    const PlanLayout layout = plan_layout(sys, Schedule{}, 4);
    const ControlBound bound = control_bound(layout, sys);
    std::mt19937_64 rng(37);
    for (int trial = 0; trial < 20; ++trial) {
        const ModeState y0{random_state(12, rng), 0.0};
        const auto plan = realize_plan(layout, y0, sys);
        CHECK(plan.signal.linf_norm(sys) <= bound.linf * y0.coeffs.norm() * (1.0 + 1e-12));
        CHECK(std::sqrt(plan.signal.l2_cost(sys)) <= bound.l2 * y0.coeffs.norm() * (1.0 + 1e-12));
    }
}

TEST_CASE("worst-case cost is positive and sweeps over windows", "[control]") {
    const auto sys = fixture::model().system(8);
    const auto sweep = cost_sweep(sys, 0.0, 1.0, 6);
    REQUIRE(sweep.costs.size() == 6);
    CHECK(sweep.mode_counts.front() == 1);
    CHECK(sweep.mode_counts.back() == 6);
    for (double c : sweep.costs) CHECK(c > 0.0);
    // A unit state along the constant mode costs |zeta|^2 times the weighted Gramian entry.
    const auto& m = fixture::model();
    const auto one = m.system(1, kWholeHorizon, CoefficientPair::constant(1.0, 0.0, 0.0));
    CHECK(worst_case_cost({0}, 0.0, 1.0, one) == Approx(3.0 / 0.7).epsilon(1e-9));
}

TEST_CASE("approximate control reaches the eps ball", "[control]") {
    const auto sys = fixture::model().system(8);
    std::mt19937_64 rng(41);
    const ModeState y0{random_state(8, rng), 0.0};
    const ModeState target{Eigen::VectorXd::Zero(8), 1.0};
    const double eps = 1e-3;
    const auto ac = approximate_control(y0, target, eps, sys);
    CHECK(ac.gap <= eps);
    CHECK(ac.gap >= eps * (1.0 - 1e-6));
    const Eigen::VectorXd yT = evolve_reduced(y0, ac.signal, sys, 1.0).coeffs;
    CHECK((yT - target.coeffs).norm() == Approx(ac.gap).epsilon(1e-6));
    for (std::size_t k = 1; k < ac.gap_history.size(); ++k) CHECK(ac.gap_history[k] <= ac.gap_history[k - 1]);
    // Optimality of 1/2 z'Lz + eps|z| + <g, z>: L z + g + eps z / |z| = 0.
    const auto lam = build_gramian(first_modes(8), 0.0, 1.0, sys);
    const Eigen::VectorXd kkt = lam.matrix * ac.zeta + ac.free_gap + eps * ac.zeta / ac.zeta.norm();
    CHECK(kkt.norm() <= 1e-6 * eps);
    CHECK(ac.stochastic_distance == Approx(ac.gap * std::sqrt(noise_second_moment(sys.coefficients(), 1.0))));
}

TEST_CASE("approximate control is free when the target is already reached", "[control]") {
    const auto sys = fixture::model().system(8);
    std::mt19937_64 rng(43);
    const ModeState y0{random_state(8, rng), 0.0};
    const ModeState free{sys.propagate(y0.coeffs, 0.0, 1.0), 1.0};
    const auto ac = approximate_control(y0, free, 1e-3, sys);
    CHECK(ac.cost == 0.0);
    CHECK(ac.signal.is_zero());
    const ModeState far{Eigen::VectorXd::Zero(8), 1.0};
    const auto loose = approximate_control(y0, far, 1e6, sys);
    CHECK(loose.zeta.cwiseAbs().maxCoeff() == 0.0);
    CHECK(loose.cost == 0.0);
}

TEST_CASE("approximate control needs E to reach T", "[control]") {
    const auto& m = fixture::model();
    const auto sys = m.system(4, {{0.0, 0.4}}, m.coefficients);
    CHECK_THROWS_AS(approximate_control(ModeState{Eigen::VectorXd::Ones(4), 0.0},
                                        ModeState{Eigen::VectorXd::Zero(4), 1.0}, 1e-3, sys),
                    MeasureConditionError);
}

TEST_CASE("counterexample moments have closed forms", "[control]") {
    const auto& m = fixture::model();
    const BrownianBundle bundle(99, 1000, 20000, 1.0);
    {
        const auto sys = m.system(4, {{0.0, 0.4}}, CoefficientPair::constant(1.0, 0.0, 0.0));
        const auto w = build_counterexample(sys, 0.4, bundle);
        CHECK(w.mean == Approx(0.0).margin(1e-9));
        CHECK(w.terminal_second_moment == Approx(0.6).epsilon(1e-9));
        CHECK(std::abs(w.mc_second_moment - 0.6) <= 3.0 * w.mc_standard_error);
        CHECK(w.observation_norm == 0.0);
        CHECK(w.initial_norm == 0.0);
        CHECK(w.paths == 20000);
    }
    {
        const auto sys = m.system(4, {{0.0, 0.4}}, CoefficientPair::constant(1.0, 0.0, 1.0));
        const auto w = build_counterexample(sys, 0.4, bundle);
        CHECK(w.mean == Approx(-0.6).epsilon(1e-9));
        CHECK(w.terminal_second_moment == Approx(0.6 + 0.36).epsilon(1e-9));
        CHECK(std::abs(w.mc_second_moment - 0.96) <= 3.0 * w.mc_standard_error);
    }
    {
        const auto sys = m.system(4, {{0.0, 0.4}}, m.coefficients);
        const auto w = build_counterexample(sys, 0.4, bundle);
        CHECK(std::abs(w.mc_second_moment - w.terminal_second_moment) <= 3.0 * w.mc_standard_error);
        REQUIRE(w.sample_paths.rows() == 4);
        CHECK((w.sample_paths.col(0).array() == 0.0).all());
    }
}

TEST_CASE("counterexample requires E to miss (s0, T)", "[control]") {
    const auto& m = fixture::model();
    const BrownianBundle bundle(1, 1000, 10, 1.0);
    CHECK_THROWS_AS(build_counterexample(m.system(4, {{0.0, 0.4}}, m.coefficients), 0.3, bundle), ArgumentError);
    CHECK_THROWS_AS(build_counterexample(m.system(4, {{0.0, 0.4}}, m.coefficients), 0.4005, bundle), ArgumentError);
    CHECK_THROWS_AS(build_counterexample(m.system(4), 0.4, bundle), ArgumentError);
}
