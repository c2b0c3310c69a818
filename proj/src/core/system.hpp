#pragma once

#include <Eigen/Dense>

#include "core/coefficients.hpp"
#include "core/domain.hpp"
#include "core/wentzell_operator.hpp"

namespace wentzell {

/// The controlled system in eigenmode coordinates: the first `modes`
/// eigenpairs, the G0 Gram matrix of those modes, the time set E and the
/// coefficients. Every solver and synthesis routine works on this view.
class ModalSystem {
public:
    ModalSystem(const SpectralBasis& basis, const ControlRegion& g0, TimeSet time_set, CoefficientPair coefficients,
                int modes);

    int modes() const { return basis_.count(); }
    const SpectralBasis& basis() const { return basis_; }
    const Eigen::VectorXd& lambdas() const { return basis_.lambdas(); }
    double lambda(int j) const { return basis_.lambda(j); }
    const Eigen::MatrixXd& gram() const { return gram_; }
    const TimeSet& time_set() const { return time_set_; }
    const CoefficientPair& coefficients() const { return coefficients_; }
    double horizon() const { return time_set_.horizon(); }
    double g0_measure() const { return g0_measure_; }

    /// exp(-lambda_j (t - s) + ∫_s^t a), the reduced mode propagator from s to t.
    double propagator(int j, double s, double t) const;

    /// Diagonal of propagators for all modes.
    Eigen::VectorXd propagate(const Eigen::VectorXd& y, double s, double t) const;

    /// Same system with E replaced.
    ModalSystem with_time_set(TimeSet time_set) const;

private:
    SpectralBasis basis_;
    Eigen::MatrixXd gram_;
    TimeSet time_set_;
    CoefficientPair coefficients_;
    double g0_measure_;
};

}  // namespace wentzell
