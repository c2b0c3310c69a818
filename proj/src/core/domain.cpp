#include "core/domain.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "core/errors.hpp"

namespace wentzell {

Domain::Domain(double length, int n_cells) : length_(length), n_cells_(n_cells) {
    if (!(length > 0.0) || !std::isfinite(length)) throw ConfigError("domain length must be positive");
    if (n_cells < 1) throw ConfigError("domain needs at least one cell");
    const Eigen::Index n = n_cells + 1;
    const double h = length / n_cells;
    nodes_.resize(n);
    for (Eigen::Index i = 0; i < n; ++i) nodes_[i] = static_cast<double>(i) * h;
    nodes_[n - 1] = length;

    bulk_weights_ = Eigen::VectorXd::Constant(n, h);
    bulk_weights_[0] = 0.5 * h;
    bulk_weights_[n - 1] = 0.5 * h;

    boundary_weights_ = Eigen::VectorXd::Zero(n);
    boundary_weights_[0] = 1.0;
    boundary_weights_[n - 1] = 1.0;

    weights_ = bulk_weights_ + boundary_weights_;
}

void Domain::check_size(const NodalField& u, const char* what) const {
    if (u.size() != size()) {
        std::ostringstream os;
        os << what << " has " << u.size() << " nodal values, grid has " << size();
        throw DimensionError(os.str());
    }
}

double Domain::inner_product(const NodalField& u, const NodalField& v) const {
    check_size(u, "first field");
    check_size(v, "second field");
    // Summed separately so the bulk and boundary contributions stay exact sums.
    const double bulk = (bulk_weights_.array() * u.array() * v.array()).sum();
    const double boundary = u[0] * v[0] + u[size() - 1] * v[size() - 1];
    return bulk + boundary;
}

double Domain::norm(const NodalField& u) const { return std::sqrt(inner_product(u, u)); }

double Domain::bulk_norm(const NodalField& u) const {
    check_size(u, "field");
    return std::sqrt((bulk_weights_.array() * u.array().square()).sum());
}

double Domain::boundary_norm(const NodalField& u) const {
    check_size(u, "field");
    return std::hypot(u[0], u[size() - 1]);
}

ControlRegion::ControlRegion(const Domain& domain, IntervalSet intervals)
    : intervals_(std::move(intervals)) {
    if (intervals_.empty()) throw ConfigError("control region G0 must be nonempty");
    if (!intervals_.inside(0.0, domain.length()))
        throw ConfigError("control region G0 must lie inside the domain");

    const Eigen::Index n = domain.size();
    const double h = domain.spacing();
    indicator_.assign(static_cast<std::size_t>(n), 0);
    weights_ = Eigen::VectorXd::Zero(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const double x = domain.nodes()[i];
        indicator_[static_cast<std::size_t>(i)] = intervals_.contains(x) ? 1 : 0;
        const double lo = std::max(0.0, x - 0.5 * h);
        const double hi = std::min(domain.length(), x + 0.5 * h);
        weights_[i] = intervals_.measure_within(lo, hi);
    }
}

bool ControlRegion::mask_empty() const {
    return std::none_of(indicator_.begin(), indicator_.end(), [](std::uint8_t v) { return v != 0; });
}

TimeSet::TimeSet(double horizon, IntervalSet intervals) : horizon_(horizon), intervals_(std::move(intervals)) {
    if (!(horizon > 0.0) || !std::isfinite(horizon)) throw ConfigError("time horizon must be positive");
    if (!intervals_.inside(0.0, horizon)) throw ConfigError("time set E must lie inside (0, T)");
    if (!(intervals_.measure() > 0.0)) throw ConfigError("time set E must have positive measure");
}

bool TimeSet::satisfies_measure_condition() const {
    // Pieces are sorted; the condition holds iff the last one ends at T.
    return intervals_.sup() >= horizon_ * (1.0 - 1e-14);
}

double inner_product_l2l2(const NodalField& u, const NodalField& v, const Domain& domain) {
    return domain.inner_product(u, v);
}

double measure_intersection(const TimeSet& time_set, double s, double t) {
    if (!(s < t)) {
        std::ostringstream os;
        os << "measure_intersection needs s < t, got s=" << s << ", t=" << t;
        throw ArgumentError(os.str());
    }
    return time_set.intervals().measure_within(s, t);
}

double restrict_to_g0(const NodalField& u, const ControlRegion& g0, const Domain& domain) {
    domain.check_size(u, "field");
    if (g0.size() != domain.size()) throw DimensionError("control region was built for another grid");
    if (g0.mask_empty()) throw ConfigError("control region G0 contains no grid node");
    return std::sqrt((g0.weights().array() * u.array().square()).sum());
}

}  // namespace wentzell
