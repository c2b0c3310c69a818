#pragma once

#include <Eigen/Dense>
#include <vector>

#include "core/domain.hpp"

namespace wentzell {

/// Discrete Wentzell operator A acting on nodal fields.
///
/// A = -W^{-1} K with W the combined bulk + boundary weights and K the
/// stiffness matrix sum_cells (u_{i+1} - u_i)^2 / h. Interior rows are the
/// three-point Laplacian; an end row is the inward difference quotient
/// divided by the node's total mass, which is the -d_nu coupling with
/// summation-by-parts pairing. WA = -K is symmetric, so A is self-adjoint in
/// the weighted product by construction and dissipative since K >= 0.
class WentzellOperator {
public:
    static WentzellOperator assemble(const Domain& domain);

    const Eigen::MatrixXd& matrix() const { return matrix_; }
    const Eigen::MatrixXd& stiffness() const { return stiffness_; }
    const Eigen::VectorXd& weights() const { return weights_; }
    Eigen::Index size() const { return weights_.size(); }

    NodalField apply(const NodalField& u) const { return matrix_ * u; }
    double inner_product(const NodalField& u, const NodalField& v) const;

    /// |<Au, v> - <u, Av>| / (|Au| |v| + |u| |Av|), zero for u or v zero.
    double self_adjointness_defect(const NodalField& u, const NodalField& v) const;

private:
    Eigen::MatrixXd matrix_;
    Eigen::MatrixXd stiffness_;
    Eigen::VectorXd weights_;
};

/// Eigenpairs of -A, ascending, with columns orthonormal in the weighted product.
class SpectralBasis {
public:
    SpectralBasis(Eigen::VectorXd lambdas, Eigen::MatrixXd vectors, Eigen::VectorXd weights);

    const Eigen::VectorXd& lambdas() const { return lambdas_; }
    const Eigen::MatrixXd& vectors() const { return vectors_; }
    const Eigen::VectorXd& weights() const { return weights_; }
    int count() const { return static_cast<int>(lambdas_.size()); }
    Eigen::Index nodes() const { return vectors_.rows(); }
    double lambda(int j) const { return lambdas_[j]; }
    auto vector(int j) const { return vectors_.col(j); }

    /// Mode coefficients <u, Psi_j>.
    Eigen::VectorXd to_modes(const NodalField& u) const;
    /// sum_j c_j Psi_j over the first c.size() modes.
    NodalField to_nodal(const Eigen::VectorXd& c) const;

    /// First `m` eigenpairs.
    SpectralBasis truncated(int m) const;

    /// |-A Psi_j - lambda_j Psi_j| in the weighted norm.
    double residual(const WentzellOperator& op, int j) const;

private:
    Eigen::VectorXd lambdas_;
    Eigen::MatrixXd vectors_;
    Eigen::VectorXd weights_;
};

/// Throws NumericError if the symmetric eigensolver does not converge.
SpectralBasis eigendecompose(const WentzellOperator& op);

/// Indices j with lambda_j <= r; the rest span the complement.
struct SpectralWindow {
    double r = 0.0;
    std::vector<int> indices;
    std::vector<int> complement;

    int size() const { return static_cast<int>(indices.size()); }
    bool empty() const { return indices.empty(); }
};

SpectralWindow spectral_window(const SpectralBasis& basis, double r);

/// Nodal projection sum_{j in indices} <u, Psi_j> Psi_j.
NodalField project(const NodalField& u, const std::vector<int>& indices, const SpectralBasis& basis);
NodalField project(const NodalField& u, const SpectralWindow& window, const SpectralBasis& basis);
NodalField project_complement(const NodalField& u, const SpectralWindow& window, const SpectralBasis& basis);

/// G_ij = <psi_i, psi_j>_{L2(G0)} for the first m modes.
Eigen::MatrixXd g0_gram(const SpectralBasis& basis, const ControlRegion& g0, int m);

/// kappa(r) = 1 / sigma_min of (a_j) -> sum_{lambda_j <= r} a_j psi_j in L2(G0).
/// Requires r >= lambda_1; throws NumericError when sigma_min < 1e-14.
double spectral_inequality_constant(const SpectralBasis& basis, const ControlRegion& g0, double r);

}  // namespace wentzell
