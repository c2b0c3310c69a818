#include "core/system.hpp"

#include <cmath>

#include "core/errors.hpp"

namespace wentzell {

ModalSystem::ModalSystem(const SpectralBasis& basis, const ControlRegion& g0, TimeSet time_set,
                         CoefficientPair coefficients, int modes)
    : basis_(basis.truncated(modes)),
      gram_(g0_gram(basis, g0, modes)),
      time_set_(std::move(time_set)),
      coefficients_(std::move(coefficients)),
      g0_measure_(g0.measure()) {
    if (std::abs(coefficients_.horizon() - time_set_.horizon()) > 1e-12 * time_set_.horizon())
        throw ConfigError("coefficient horizon differs from the time horizon T");
}

double ModalSystem::propagator(int j, double s, double t) const {
    return std::exp(-basis_.lambda(j) * (t - s) + coefficients_.a().integral(s, t));
}

Eigen::VectorXd ModalSystem::propagate(const Eigen::VectorXd& y, double s, double t) const {
    if (y.size() != modes()) throw DimensionError("mode vector length differs from the system's mode count");
    const double growth = coefficients_.a().integral(s, t);
    return (y.array() * (-basis_.lambdas().array() * (t - s) + growth).exp()).matrix();
}

ModalSystem ModalSystem::with_time_set(TimeSet time_set) const {
    ModalSystem out = *this;
    out.time_set_ = std::move(time_set);
    return out;
}

}  // namespace wentzell
