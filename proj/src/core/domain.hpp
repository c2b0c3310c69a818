#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "core/intervals.hpp"

namespace wentzell {

/// Nodal values of a state (y, y_Gamma) on the grid. The trace condition
/// y_Gamma = y|_Gamma means the two boundary entries double as the surface part.
using NodalField = Eigen::VectorXd;

/// Uniform grid on (0, length) whose boundary is the two end nodes.
///
/// The product space carries two measures: trapezoidal bulk weights
/// (h/2 at the ends, h inside) and a unit point mass at each end node.
/// Both are kept separately; `weights()` is their sum and defines the
/// inner product of bulk plus boundary integrals.
class Domain {
public:
    Domain(double length, int n_cells);

    double length() const { return length_; }
    int n_cells() const { return n_cells_; }
    Eigen::Index size() const { return nodes_.size(); }
    double spacing() const { return length_ / n_cells_; }

    const Eigen::VectorXd& nodes() const { return nodes_; }
    const Eigen::VectorXd& bulk_weights() const { return bulk_weights_; }
    const Eigen::VectorXd& boundary_weights() const { return boundary_weights_; }
    const Eigen::VectorXd& weights() const { return weights_; }

    double inner_product(const NodalField& u, const NodalField& v) const;
    double norm(const NodalField& u) const;
    double bulk_norm(const NodalField& u) const;
    double boundary_norm(const NodalField& u) const;

    void check_size(const NodalField& u, const char* what) const;

private:
    double length_;
    int n_cells_;
    Eigen::VectorXd nodes_;
    Eigen::VectorXd bulk_weights_;
    Eigen::VectorXd boundary_weights_;
    Eigen::VectorXd weights_;
};

/// Spatial observation/control region G0 as a union of subintervals.
///
/// `indicator()` marks the nodes lying inside G0. `weights()` are the
/// L2(G0) quadrature weights: the length of G0 inside each node's dual cell
/// [x_i - h/2, x_i + h/2], which reduces to the trapezoidal rule on G0
/// whenever its endpoints are grid nodes.
class ControlRegion {
public:
    ControlRegion(const Domain& domain, IntervalSet intervals);

    const IntervalSet& intervals() const { return intervals_; }
    const std::vector<std::uint8_t>& indicator() const { return indicator_; }
    const Eigen::VectorXd& weights() const { return weights_; }
    double measure() const { return intervals_.measure(); }
    Eigen::Index size() const { return weights_.size(); }
    bool mask_empty() const;

private:
    IntervalSet intervals_;
    std::vector<std::uint8_t> indicator_;
    Eigen::VectorXd weights_;
};

/// Time control set E inside (0, horizon).
class TimeSet {
public:
    TimeSet(double horizon, IntervalSet intervals);

    double horizon() const { return horizon_; }
    const IntervalSet& intervals() const { return intervals_; }
    double measure() const { return intervals_.measure(); }
    bool contains(double t) const { return intervals_.contains(t); }

    /// m((s, T) ∩ E) > 0 for every s in [0, T): the last piece of E reaches T.
    bool satisfies_measure_condition() const;

private:
    double horizon_;
    IntervalSet intervals_;
};

/// Bulk quadrature plus boundary point sum.
double inner_product_l2l2(const NodalField& u, const NodalField& v, const Domain& domain);

/// Lebesgue measure of E ∩ (s, t); requires s < t.
double measure_intersection(const TimeSet& time_set, double s, double t);

/// L2(G0) norm of the bulk part of u.
double restrict_to_g0(const NodalField& u, const ControlRegion& g0, const Domain& domain);

}  // namespace wentzell
