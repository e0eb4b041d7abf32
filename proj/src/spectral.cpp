#include "qdev/spectral.hpp"

#include <cmath>
#include <string>

namespace qdev {

double max_norm(const Matrix& m) {
    return m.size() == 0 ? 0.0 : m.cwiseAbs().maxCoeff();
}

double operator_norm(const Matrix& m) {
    if (m.size() == 0) return 0.0;
    Eigen::JacobiSVD<Matrix> svd(m);
    return svd.singularValues()(0);
}

double trace_norm(const Matrix& m) {
    if (m.size() == 0) return 0.0;
    Eigen::JacobiSVD<Matrix> svd(m);
    return svd.singularValues().sum();
}

Matrix hermitian_part(const Matrix& m) {
    return 0.5 * (m + m.adjoint());
}

bool is_hermitian(const Matrix& m, double tol) {
    return m.rows() == m.cols() && max_norm(m - m.adjoint()) <= tol;
}

Matrix kron(const Matrix& a, const Matrix& b) {
    Matrix out(a.rows() * b.rows(), a.cols() * b.cols());
    for (Index i = 0; i < a.rows(); ++i)
        for (Index j = 0; j < a.cols(); ++j)
            out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
    return out;
}

Matrix matrix_unit(Index dim, Index i, Index j) {
    Matrix e = Matrix::Zero(dim, dim);
    e(i, j) = 1.0;
    return e;
}

Vector vec(const Matrix& x) {
    return Eigen::Map<const Vector>(x.data(), x.size());
}

Matrix unvec(const Vector& v, Index dim) {
    if (v.size() != dim * dim) throw DimensionMismatch("unvec: vector length is not dim^2");
    return Eigen::Map<const Matrix>(v.data(), dim, dim);
}

Matrix hermitian_function(const Matrix& a, const std::function<double(double)>& f) {
    Eigen::SelfAdjointEigenSolver<Matrix> es(hermitian_part(a));
    RealVector fv = es.eigenvalues().unaryExpr(f);
    return es.eigenvectors() * fv.cast<cplx>().asDiagonal() * es.eigenvectors().adjoint();
}

Matrix psd_sqrt(const Matrix& a) {
    return hermitian_function(a, [](double x) { return x > 0.0 ? std::sqrt(x) : 0.0; });
}

HermitianOperator::HermitianOperator(const Matrix& m, double tol) {
    if (m.rows() != m.cols()) throw DimensionMismatch("Hermitian operator must be square");
    if (!is_hermitian(m, tol)) {
        throw ValidationError("operator is not Hermitian within tolerance",
                              "deviation=" + std::to_string(max_norm(m - m.adjoint())));
    }
    m_ = hermitian_part(m);
}

DensityOperator::DensityOperator(const Matrix& m, double tol) {
    if (m.rows() != m.cols() || m.rows() == 0) throw DimensionMismatch("density operator must be square and non-empty");
    if (!is_hermitian(m, tol)) throw ValidationError("density operator is not Hermitian");
    Matrix h = hermitian_part(m);
    Eigen::SelfAdjointEigenSolver<Matrix> es(h);
    evals_ = es.eigenvalues();
    if (evals_(0) < -tol) {
        throw ValidationError("density operator has a negative eigenvalue",
                              "min_eigenvalue=" + std::to_string(evals_(0)));
    }
    if (std::abs(h.trace().real() - 1.0) > tol) {
        throw ValidationError("density operator trace differs from 1",
                              "trace=" + std::to_string(h.trace().real()));
    }
    if (evals_(0) < 0.0) {
        evals_ = evals_.cwiseMax(0.0);
        h = es.eigenvectors() * evals_.cast<cplx>().asDiagonal() * es.eigenvectors().adjoint();
    }
    m_ = h;
}

DensityOperator DensityOperator::maximally_mixed(Index dim) {
    return DensityOperator(Matrix::Identity(dim, dim) / static_cast<double>(dim));
}

FaithfulState::FaithfulState(const DensityOperator& rho, double threshold) : rho_(rho.matrix()) {
    Eigen::SelfAdjointEigenSolver<Matrix> es(rho_);
    const Index d = rho_.rows();
    s_.resize(d);
    u_.resize(d, d);
    for (Index k = 0; k < d; ++k) {
        s_(k) = es.eigenvalues()(d - 1 - k);
        u_.col(k) = es.eigenvectors().col(d - 1 - k);
    }
    if (!(s_(d - 1) > threshold)) {
        throw NotFaithfulError("state is not faithful", "s_min=" + std::to_string(s_(d - 1)));
    }
}

Matrix FaithfulState::power(double p) const {
    RealVector sp = s_.array().pow(p);
    return u_ * sp.cast<cplx>().asDiagonal() * u_.adjoint();
}

const char* to_string(InnerProductKind kind) {
    switch (kind) {
        case InnerProductKind::GNS: return "GNS";
        case InnerProductKind::KMS: return "KMS";
        case InnerProductKind::BKM: return "BKM";
    }
    return "?";
}

double log_mean(double si, double sj) {
    if (std::abs(si - sj) < 1e-12 * si) return si;
    return (si - sj) / std::log1p((si - sj) / sj);
}

namespace {

double gram_coefficient(InnerProductKind kind, double si, double sj) {
    switch (kind) {
        case InnerProductKind::GNS: return sj;
        case InnerProductKind::KMS: return std::sqrt(si * sj);
        case InnerProductKind::BKM: return log_mean(si, sj);
    }
    return 0.0;
}

void require_same_dim(const FaithfulState& sigma, const Matrix& x, const char* what) {
    if (x.rows() != sigma.dim() || x.cols() != sigma.dim())
        throw DimensionMismatch(std::string(what) + ": operand dimension does not match the state");
}

// Superoperator acting entrywise in sigma's eigenbasis with coefficients c(i,j).
template <class Coef>
SuperOperator eigenbasis_diagonal(const FaithfulState& sigma, Coef coef) {
    const Index d = sigma.dim();
    const Matrix& u = sigma.eigenvectors();
    Matrix w = kron(u.conjugate(), u);
    Vector c(d * d);
    for (Index j = 0; j < d; ++j)
        for (Index i = 0; i < d; ++i) c(j * d + i) = coef(sigma.eigenvalues()(i), sigma.eigenvalues()(j));
    return SuperOperator(d, w * c.asDiagonal() * w.adjoint());
}

}  // namespace

cplx inner_product(InnerProductKind kind, const FaithfulState& sigma, const Matrix& x, const Matrix& y) {
    require_same_dim(sigma, x, "inner_product");
    require_same_dim(sigma, y, "inner_product");
    Matrix xe = sigma.to_eigenbasis(x);
    Matrix ye = sigma.to_eigenbasis(y);
    const RealVector& s = sigma.eigenvalues();
    cplx acc = 0.0;
    for (Index j = 0; j < sigma.dim(); ++j)
        for (Index i = 0; i < sigma.dim(); ++i)
            acc += std::conj(xe(i, j)) * gram_coefficient(kind, s(i), s(j)) * ye(i, j);
    return acc;
}

double transform_coefficient(const SpectralTransform& t, double si, double sj) {
    switch (t.kind) {
        case SpectralTransform::Kind::delta_power: return std::pow(si / sj, t.p);
        case SpectralTransform::Kind::tanh_log_quarter: return std::tanh(0.25 * std::log(si / sj));
        case SpectralTransform::Kind::bkm_M: return log_mean(si, sj);
        case SpectralTransform::Kind::bkm_M_inverse: return 1.0 / log_mean(si, sj);
    }
    return 0.0;
}

Matrix spectral_transform(const SpectralTransform& t, const FaithfulState& sigma, const Matrix& x) {
    require_same_dim(sigma, x, "spectral_transform");
    Matrix xe = sigma.to_eigenbasis(x);
    const RealVector& s = sigma.eigenvalues();
    for (Index j = 0; j < sigma.dim(); ++j)
        for (Index i = 0; i < sigma.dim(); ++i) xe(i, j) *= transform_coefficient(t, s(i), s(j));
    return sigma.from_eigenbasis(xe);
}

Matrix gamma_map(double power, const FaithfulState& sigma, const Matrix& x) {
    require_same_dim(sigma, x, "gamma_map");
    Matrix xe = sigma.to_eigenbasis(x);
    const RealVector& s = sigma.eigenvalues();
    for (Index j = 0; j < sigma.dim(); ++j)
        for (Index i = 0; i < sigma.dim(); ++i) xe(i, j) *= std::pow(s(i) * s(j), 0.5 * power);
    return sigma.from_eigenbasis(xe);
}

SuperOperator::SuperOperator(Index dim, Matrix m) : dim_(dim), m_(std::move(m)) {
    if (m_.rows() != dim * dim || m_.cols() != dim * dim)
        throw DimensionMismatch("superoperator matrix must be dim^2 x dim^2");
}

SuperOperator SuperOperator::identity(Index dim) {
    return SuperOperator(dim, Matrix::Identity(dim * dim, dim * dim));
}

SuperOperator SuperOperator::sandwich(const Matrix& a, const Matrix& b) {
    if (a.rows() != a.cols() || b.rows() != b.cols() || a.rows() != b.rows())
        throw DimensionMismatch("sandwich: operands must be square and of equal size");
    return SuperOperator(a.rows(), kron(b.transpose(), a));
}

Matrix SuperOperator::apply(const Matrix& x) const {
    if (x.rows() != dim_ || x.cols() != dim_) throw DimensionMismatch("superoperator applied to operand of wrong size");
    return unvec(m_ * vec(x), dim_);
}

SuperOperator SuperOperator::adjoint() const { return SuperOperator(dim_, m_.adjoint()); }

SuperOperator SuperOperator::operator*(const SuperOperator& rhs) const {
    if (rhs.dim_ != dim_) throw DimensionMismatch("superoperator composition dimension mismatch");
    return SuperOperator(dim_, m_ * rhs.m_);
}

SuperOperator SuperOperator::operator+(const SuperOperator& rhs) const {
    if (rhs.dim_ != dim_) throw DimensionMismatch("superoperator sum dimension mismatch");
    return SuperOperator(dim_, m_ + rhs.m_);
}

SuperOperator SuperOperator::operator-(const SuperOperator& rhs) const {
    if (rhs.dim_ != dim_) throw DimensionMismatch("superoperator difference dimension mismatch");
    return SuperOperator(dim_, m_ - rhs.m_);
}

SuperOperator SuperOperator::operator*(cplx c) const { return SuperOperator(dim_, c * m_); }

SuperOperator to_superoperator(Index dim, const MatrixMap& map) {
    Matrix m(dim * dim, dim * dim);
    for (Index j = 0; j < dim; ++j)
        for (Index i = 0; i < dim; ++i) {
            Matrix image = map(matrix_unit(dim, i, j));
            if (image.rows() != dim || image.cols() != dim)
                throw DimensionMismatch("to_superoperator: map changes the operand dimension");
            m.col(j * dim + i) = vec(image);
        }
    return SuperOperator(dim, std::move(m));
}

Matrix apply(const SuperOperator& s, const Matrix& x) { return s.apply(x); }

SuperOperator spectral_superoperator(const SpectralTransform& t, const FaithfulState& sigma) {
    return eigenbasis_diagonal(sigma, [&](double si, double sj) { return transform_coefficient(t, si, sj); });
}

SuperOperator gamma_superoperator(double power, const FaithfulState& sigma) {
    return eigenbasis_diagonal(sigma, [&](double si, double sj) { return std::pow(si * sj, 0.5 * power); });
}

SuperOperator gram_superoperator(InnerProductKind kind, const FaithfulState& sigma) {
    switch (kind) {
        case InnerProductKind::GNS:
            return SuperOperator::sandwich(Matrix::Identity(sigma.dim(), sigma.dim()), sigma.matrix());
        case InnerProductKind::KMS: return gamma_superoperator(1.0, sigma);
        case InnerProductKind::BKM: return spectral_superoperator(SpectralTransform::bkm_M(), sigma);
    }
    throw ValidationError("unknown inner product kind");
}

SuperOperator gram_inverse_superoperator(InnerProductKind kind, const FaithfulState& sigma) {
    switch (kind) {
        case InnerProductKind::GNS:
            return SuperOperator::sandwich(Matrix::Identity(sigma.dim(), sigma.dim()), sigma.power(-1.0));
        case InnerProductKind::KMS: return gamma_superoperator(-1.0, sigma);
        case InnerProductKind::BKM: return spectral_superoperator(SpectralTransform::bkm_M_inverse(), sigma);
    }
    throw ValidationError("unknown inner product kind");
}

}  // namespace qdev
