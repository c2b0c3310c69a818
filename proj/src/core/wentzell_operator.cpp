#include "core/wentzell_operator.hpp"

#include <Eigen/SVD>
#include <cmath>
#include <limits>
#include <sstream>

#include "core/errors.hpp"

namespace wentzell {

WentzellOperator WentzellOperator::assemble(const Domain& domain) {
    if (domain.n_cells() < 3) throw ConfigError("Wentzell operator needs n_cells >= 3");
    const Eigen::Index n = domain.size();
    const double h = domain.spacing();

    WentzellOperator op;
    op.weights_ = domain.weights();
    op.stiffness_ = Eigen::MatrixXd::Zero(n, n);
    for (Eigen::Index i = 0; i + 1 < n; ++i) {
        op.stiffness_(i, i) += 1.0 / h;
        op.stiffness_(i + 1, i + 1) += 1.0 / h;
        op.stiffness_(i, i + 1) -= 1.0 / h;
        op.stiffness_(i + 1, i) -= 1.0 / h;
    }
    op.matrix_ = -(op.weights_.cwiseInverse().asDiagonal() * op.stiffness_);
    return op;
}

double WentzellOperator::inner_product(const NodalField& u, const NodalField& v) const {
    return (weights_.array() * u.array() * v.array()).sum();
}

double WentzellOperator::self_adjointness_defect(const NodalField& u, const NodalField& v) const {
    const NodalField au = apply(u);
    const NodalField av = apply(v);
    auto norm = [&](const NodalField& x) { return std::sqrt(inner_product(x, x)); };
    const double scale = norm(au) * norm(v) + norm(u) * norm(av);
    if (scale == 0.0) return 0.0;
    return std::abs(inner_product(au, v) - inner_product(u, av)) / scale;
}

SpectralBasis::SpectralBasis(Eigen::VectorXd lambdas, Eigen::MatrixXd vectors, Eigen::VectorXd weights)
    : lambdas_(std::move(lambdas)), vectors_(std::move(vectors)), weights_(std::move(weights)) {
    if (vectors_.cols() != lambdas_.size() || vectors_.rows() != weights_.size())
        throw DimensionError("spectral basis shapes disagree");
}

Eigen::VectorXd SpectralBasis::to_modes(const NodalField& u) const {
    if (u.size() != nodes()) throw DimensionError("field length does not match the spectral basis grid");
    return vectors_.transpose() * (weights_.array() * u.array()).matrix();
}

NodalField SpectralBasis::to_nodal(const Eigen::VectorXd& c) const {
    if (c.size() > count()) throw DimensionError("more mode coefficients than basis vectors");
    return vectors_.leftCols(c.size()) * c;
}

SpectralBasis SpectralBasis::truncated(int m) const {
    if (m < 1 || m > count()) throw ArgumentError("truncation count out of range");
    return SpectralBasis(lambdas_.head(m), vectors_.leftCols(m), weights_);
}

double SpectralBasis::residual(const WentzellOperator& op, int j) const {
    const NodalField psi = vectors_.col(j);
    const NodalField r = -op.apply(psi) - lambdas_[j] * psi;
    return std::sqrt(op.inner_product(r, r));
}

SpectralBasis eigendecompose(const WentzellOperator& op) {
    const Eigen::VectorXd inv_sqrt_w = op.weights().cwiseSqrt().cwiseInverse();
    // W^{1/2} (-A) W^{-1/2} = W^{-1/2} K W^{-1/2} is symmetric positive semidefinite.
    Eigen::MatrixXd s = inv_sqrt_w.asDiagonal() * op.stiffness() * inv_sqrt_w.asDiagonal();
    s = 0.5 * (s + s.transpose());

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(s);
    if (solver.info() != Eigen::Success) {
        std::ostringstream os;
        os << "symmetric eigensolver failed on a " << s.rows() << "x" << s.cols()
           << " matrix (Eigen info code " << static_cast<int>(solver.info()) << ", max "
           << Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>::m_maxIterations << " sweeps per eigenvalue)";
        throw NumericError(os.str());
    }

    Eigen::VectorXd lambdas = solver.eigenvalues();
    const double floor = 64.0 * std::numeric_limits<double>::epsilon() * lambdas.cwiseAbs().maxCoeff();
    for (auto& l : lambdas) {
        if (l < -floor) throw NumericError("negative eigenvalue of a positive semidefinite stiffness matrix");
        if (l < 0.0) l = 0.0;
    }

    Eigen::MatrixXd vectors = inv_sqrt_w.asDiagonal() * solver.eigenvectors();
    for (Eigen::Index j = 0; j < vectors.cols(); ++j) {
        auto col = vectors.col(j);
        const double tol = 1e-10 * col.cwiseAbs().maxCoeff();
        for (Eigen::Index i = 0; i < col.size(); ++i) {
            if (std::abs(col[i]) > tol) {
                if (col[i] < 0.0) col = -col;
                break;
            }
        }
    }
    return SpectralBasis(std::move(lambdas), std::move(vectors), op.weights());
}

SpectralWindow spectral_window(const SpectralBasis& basis, double r) {
    SpectralWindow w;
    w.r = r;
    for (int j = 0; j < basis.count(); ++j) (basis.lambda(j) <= r ? w.indices : w.complement).push_back(j);
    return w;
}

NodalField project(const NodalField& u, const std::vector<int>& indices, const SpectralBasis& basis) {
    const Eigen::VectorXd c = basis.to_modes(u);
    NodalField out = NodalField::Zero(u.size());
    for (int j : indices) out += c[j] * basis.vectors().col(j);
    return out;
}

NodalField project(const NodalField& u, const SpectralWindow& window, const SpectralBasis& basis) {
    return project(u, window.indices, basis);
}

NodalField project_complement(const NodalField& u, const SpectralWindow& window, const SpectralBasis& basis) {
    return project(u, window.complement, basis);
}

Eigen::MatrixXd g0_gram(const SpectralBasis& basis, const ControlRegion& g0, int m) {
    if (g0.size() != basis.nodes()) throw DimensionError("control region was built for another grid");
    if (m < 1 || m > basis.count()) throw ArgumentError("Gram size out of range");
    const auto psi = basis.vectors().leftCols(m);
    Eigen::MatrixXd g = psi.transpose() * g0.weights().asDiagonal() * psi;
    return 0.5 * (g + g.transpose());
}

double spectral_inequality_constant(const SpectralBasis& basis, const ControlRegion& g0, double r) {
    if (g0.size() != basis.nodes()) throw DimensionError("control region was built for another grid");
    if (r < basis.lambda(0)) throw ArgumentError("spectral window threshold is below lambda_1");
    const SpectralWindow w = spectral_window(basis, r);
    Eigen::MatrixXd b(basis.nodes(), w.size());
    const Eigen::VectorXd sqrt_g = g0.weights().cwiseSqrt();
    for (int k = 0; k < w.size(); ++k) b.col(k) = sqrt_g.cwiseProduct(basis.vectors().col(w.indices[k]));
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(b);
    const double smin = svd.singularValues().minCoeff();
    if (!(smin >= 1e-14)) {
        std::ostringstream os;
        os << "degenerate observation: sigma_min=" << smin << " for r=" << r << " (" << w.size()
           << " modes); G0 is too small for this window";
        throw NumericError(os.str());
    }
    return 1.0 / smin;
}

}  // namespace wentzell
