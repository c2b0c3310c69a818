#pragma once

#include <vector>

#include "core/system.hpp"
#include "oracles.hpp"

// Shared model: unit interval, G0 = (0.1, 0.8), T = 1,
// E = (0.1, 0.45) ∪ (0.55, 1), a and b piecewise constant with a break at 1/2.
namespace fixture {

struct Model {
    wentzell::Domain domain{1.0, 128};
    wentzell::ControlRegion g0{domain, wentzell::IntervalSet::single(0.1, 0.8)};
    wentzell::SpectralBasis basis = wentzell::eigendecompose(wentzell::WentzellOperator::assemble(domain));
    wentzell::CoefficientPair coefficients{wentzell::PiecewiseConstant({0.0, 0.5, 1.0}, {0.5, -0.3}),
                                           wentzell::PiecewiseConstant({0.0, 0.5, 1.0}, {0.4, 0.6})};
    std::vector<std::pair<double, double>> e{{0.1, 0.45}, {0.55, 1.0}};
    oracle::Piecewise a{{0.0, 0.5}, {0.5, -0.3}};

    wentzell::TimeSet time_set(const std::vector<std::pair<double, double>>& pieces) const {
        std::vector<wentzell::Interval> v;
        for (const auto& [lo, hi] : pieces) v.push_back({lo, hi});
        return {1.0, wentzell::IntervalSet(v)};
    }

    wentzell::ModalSystem system(int modes) const { return {basis, g0, time_set(e), coefficients, modes}; }

    wentzell::ModalSystem system(int modes, const std::vector<std::pair<double, double>>& pieces,
                                 const wentzell::CoefficientPair& c) const {
        return {basis, g0, time_set(pieces), c, modes};
    }

    std::vector<double> lambdas(int modes) const {
        std::vector<double> out;
        for (int j = 0; j < modes; ++j) out.push_back(basis.lambda(j));
        return out;
    }
};

inline const Model& model() {
    static const Model m;
    return m;
}

}  // namespace fixture
