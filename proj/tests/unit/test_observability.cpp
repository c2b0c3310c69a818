#include <catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <random>

#include "core/errors.hpp"
#include "core/observability.hpp"
#include "fixtures.hpp"

using namespace wentzell;
using Catch::Approx;

namespace {

Eigen::VectorXd random_unit(int m, std::mt19937_64& rng) {
    std::normal_distribution<double> n01;
    Eigen::VectorXd v(m);
    for (int j = 0; j < m; ++j) v[j] = n01(rng);
    return v / v.norm();
}

// |z(t)|_{L2(G0)} from the modal Gram matrix and the closed-form adjoint.
double g0_norm(const Eigen::VectorXd& zT, const ModalSystem& sys, double t) {
    const auto& m = fixture::model();
    Eigen::VectorXd z(zT.size());
    for (Eigen::Index j = 0; j < zT.size(); ++j)
        z[j] = zT[j] * std::exp(-m.basis.lambda(static_cast<int>(j)) * (1.0 - t) +
                                oracle::piecewise_integral(m.a, t, 1.0));
    return std::sqrt(std::max(0.0, z.dot(sys.gram() * z)));
}

}  // namespace

TEST_CASE("high modes of the adjoint decay at the spectral rate", "[observability]") {
    const auto sys = fixture::model().system(16);
    std::mt19937_64 rng(3);
    for (int trial = 0; trial < 50; ++trial) {
        const ModeState zT{random_unit(16, rng), 1.0};
        for (double r : {1.0, 10.0, 100.0, 500.0})
            for (double t : {0.0, 0.3, 0.7, 0.99, 1.0}) CHECK(check_highmode_decay(zT, r, t, sys).holds());
    }
}

TEST_CASE("observation ratio A stays below the energy bound", "[observability]") {
    const auto sys = fixture::model().system(16);
    std::vector<double> times;
    for (int k = 0; k < 12; ++k) times.push_back(k / 12.0);
    const auto prof = interpolation_sweep(sys, times, 32, 5);
    CHECK(prof.a_max <= prof.a_bound);
    CHECK(prof.a_bound == Approx(std::exp(0.5)));
    REQUIRE(prof.worst.size() == times.size());
    // The dominating constant covers every sampled worst ratio.
    for (std::size_t i = 0; i < times.size(); ++i) {
        const double x = 1.0 / (1.0 - times[i]);
        CHECK(std::log(prof.dominating_constant) + prof.dominating_constant * x >= std::log(prof.worst[i]));
    }
}

TEST_CASE("interpolation ratio is infinite when the observation vanishes", "[observability]") {
    const auto sys = fixture::model().system(4);
    const auto s = check_interpolation(ModeState{Eigen::VectorXd::Zero(4), 1.0}, 0.5, sys);
    CHECK(s.ratio == 0.0);
    CHECK(s.ratio_a == 0.0);
    CHECK_THROWS_AS(check_interpolation(ModeState{Eigen::VectorXd::Ones(4), 1.0}, 1.0, sys), ArgumentError);
}

TEST_CASE("dominating constant is the least feasible value", "[observability]") {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> ux(0.5, 20.0), uy(-3.0, 12.0);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<double> x(8), y(8);
        for (int i = 0; i < 8; ++i) {
            x[i] = ux(rng);
            y[i] = uy(rng);
        }
        const double c = dominating_constant(x, y);
        auto feasible = [&](double cc) {
            for (int i = 0; i < 8; ++i)
                if (std::log(cc) + cc * x[i] < y[i]) return false;
            return true;
        };
        CHECK(feasible(c));
        if (c > 1e-12) CHECK_FALSE(feasible(c * (1.0 - 1e-9)));
    }
    CHECK(dominating_constant({1.0}, {std::numeric_limits<double>::infinity()}) ==
          std::numeric_limits<double>::infinity());
}

TEST_CASE("slicing sequences verify on random time sets", "[observability]") {
    std::mt19937_64 rng(2024);
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    int built = 0;
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<double> cuts;
        const int pieces = 1 + trial % 3;
        for (int k = 0; k < 2 * pieces; ++k) cuts.push_back(u01(rng));
        std::sort(cuts.begin(), cuts.end());
        std::vector<Interval> iv;
        for (int k = 0; k < pieces; ++k)
            if (cuts[2 * k + 1] - cuts[2 * k] > 1e-3) iv.push_back({cuts[2 * k], cuts[2 * k + 1]});
        if (iv.empty()) continue;
        const TimeSet e(1.0, IntervalSet(iv));
        const double s = 0.9 * u01(rng) * e.intervals().sup();
        const double c = 0.1 + 5.0 * u01(rng);
        const auto seq = build_slicing(e, s, c, 1.0 / 4096);
        ++built;
        const auto check = verify_slicing(seq, e);
        CHECK(check.ok());
        CHECK(seq.rho == Approx((c + 0.5) / (c + 1.0)));
        REQUIRE(seq.times.size() == static_cast<std::size_t>(seq.truncation) + 1);
        CHECK(seq.times.front() >= std::max(s, seq.component.lo));
        CHECK(seq.times.back() <= seq.component.hi);
        for (int i = 0; i < seq.truncation; ++i) {
            CHECK(seq.gap(i) >= seq.dt);
            CHECK(seq.etas[static_cast<std::size_t>(i)] > seq.times[static_cast<std::size_t>(i)]);
            CHECK(seq.etas[static_cast<std::size_t>(i)] < seq.times[static_cast<std::size_t>(i) + 1]);
        }
    }
    CHECK(built >= 40);
}

TEST_CASE("slicing needs E to meet (s, T)", "[observability]") {
    const TimeSet e(1.0, IntervalSet::single(0.0, 0.4));
    CHECK_THROWS_AS(build_slicing(e, 0.5, 1.0, 1.0 / 1024), MeasureConditionError);
    CHECK_THROWS_AS(build_slicing(e, 0.0, -1.0, 1.0 / 1024), ArgumentError);
}

TEST_CASE("telescoping inequalities hold with the fitted slice constant", "[observability]") {
    const auto sys = fixture::model().system(12);
    std::mt19937_64 rng(19);
    std::vector<Eigen::VectorXd> states;
    for (int k = 0; k < 6; ++k) states.push_back(random_unit(12, rng));
    double c = 0.5;
    SlicingSequence seq = build_slicing(sys.time_set(), 0.0, c, 1.0 / 4096);
    for (int it = 0; it < 10; ++it) {
        const double next = std::max(c, slice_constant(states, seq, sys));
        if (next <= c) break;
        c = next;
        seq = build_slicing(sys.time_set(), 0.0, c, 1.0 / 4096);
    }
    REQUIRE(c >= slice_constant(states, seq, sys));
    for (const auto& z : states) {
        const auto tele = check_telescoping(z, seq, sys, c);
        CHECK(tele.slice);
        CHECK(tele.chain);
        CHECK(tele.final_bound);
        CHECK(tele.energy_transfer);
    }
}

TEST_CASE("observation integral matches Simpson quadrature", "[observability]") {
    const auto sys = fixture::model().system(10);
    std::mt19937_64 rng(23);
    for (int trial = 0; trial < 5; ++trial) {
        const Eigen::VectorXd zT = random_unit(10, rng);
        auto f = [&](double t) { return g0_norm(zT, sys, t); };
        // Grade the last piece toward T, where high modes vary fastest.
        double expected = oracle::simpson(f, 0.2, 0.45, 4000) + oracle::simpson(f, 0.55, 0.99, 8000) +
                          oracle::simpson(f, 0.99, 1.0, 8000);
        CHECK(observation_integral(zT, sys, 0.2, 1.0) == Approx(expected).epsilon(1e-9));
        expected = oracle::simpson(f, 0.55, 0.75, 8000);
        CHECK(observation_integral(zT, sys, 0.5, 0.75) == Approx(expected).epsilon(1e-9));
    }
}

TEST_CASE("observability constant dominates sampled ratios", "[observability]") {
    const auto sys = fixture::model().system(6);
    const auto rep = estimate_observability_constant(sys, 0.0, 12, 7);
    REQUIRE(rep.regime == ObservabilityRegime::holds);
    REQUIRE(std::isfinite(rep.constant_estimate));
    std::mt19937_64 rng(29);
    for (int trial = 0; trial < 200; ++trial) {
        const Eigen::VectorXd zT = random_unit(6, rng);
        const double obs = observation_integral(zT, sys, 0.0, 1.0);
        const double ratio = adjoint_state(zT, sys, 0.0).squaredNorm() / (obs * obs);
        CHECK(ratio <= rep.constant_estimate * (1.0 + 1e-9));
    }
    const double obs = observation_integral(rep.maximizer, sys, 0.0, 1.0);
    CHECK(adjoint_state(rep.maximizer, sys, 0.0).squaredNorm() / (obs * obs) ==
          Approx(rep.constant_estimate).epsilon(1e-9));
}

TEST_CASE("observability fails when E misses (s, T)", "[observability]") {
    const auto& m = fixture::model();
    const auto sys = m.system(6, {{0.0, 0.4}}, m.coefficients);
    const auto rep = estimate_observability_constant(sys, 0.5, 4, 1);
    CHECK(rep.regime == ObservabilityRegime::fails);
    CHECK(rep.constant_estimate == std::numeric_limits<double>::infinity());
    REQUIRE(rep.witness.has_value());
    CHECK(rep.witness->norm() > 0.0);
    const auto uc = check_unique_continuation(ModeState{*rep.witness, 1.0}, sys, m.g0, 0.5, 1e-10, 1.0);
    CHECK(uc.observation_sup == 0.0);
    CHECK(uc.observation_l1 == 0.0);
    CHECK_FALSE(uc.implication_holds);
}

TEST_CASE("unique continuation holds for observable states", "[observability]") {
    const auto& m = fixture::model();
    const auto sys = m.system(8);
    const auto zero = check_unique_continuation(ModeState{Eigen::VectorXd::Zero(8), 1.0}, sys, m.g0, 0.0, 1e-10, 1.0);
    CHECK(zero.observation_sup == 0.0);
    CHECK(zero.implication_holds);
    std::mt19937_64 rng(31);
    for (int trial = 0; trial < 10; ++trial) {
        const auto uc = check_unique_continuation(ModeState{random_unit(8, rng), 1.0}, sys, m.g0, 0.0, 1e-10, 1.0);
        CHECK(uc.observation_sup > 1e-3);
        CHECK(uc.observation_l1 > 0.0);
        CHECK(uc.implication_holds);
    }
    CHECK(unique_continuation_implication(0.0, 0.0, 1e-10, 1.0));
    CHECK_FALSE(unique_continuation_implication(0.0, 1.0, 1e-10, 1.0));
    CHECK(unique_continuation_implication(0.5, 1.0, 1e-10, 1.0));
}
