// spectral.hpp - dense matrix helpers, superoperators and the modular calculus of a faithful state.
#pragma once

#include <complex>
#include <functional>

#include <Eigen/Dense>

#include "qdev/errors.hpp"

namespace qdev {

using cplx = std::complex<double>;
using Matrix = Eigen::MatrixXcd;
using Vector = Eigen::VectorXcd;
using RealMatrix = Eigen::MatrixXd;
using RealVector = Eigen::VectorXd;
using Index = Eigen::Index;

inline constexpr double kHermiticityTol = 1e-10;
inline constexpr double kFaithfulThreshold = 1e-12;

double max_norm(const Matrix& m);
double operator_norm(const Matrix& m);  // largest singular value
double trace_norm(const Matrix& m);      // for Hermitian input: sum |eigenvalues|
Matrix hermitian_part(const Matrix& m);
bool is_hermitian(const Matrix& m, double tol = kHermiticityTol);
Matrix kron(const Matrix& a, const Matrix& b);
Matrix matrix_unit(Index dim, Index i, Index j);

// Column stacking: |i><j| -> index j*dim + i, so vec(A X B) = (B^T kron A) vec(X).
Vector vec(const Matrix& x);
Matrix unvec(const Vector& v, Index dim);

// f(A) for Hermitian A, computed on (A + A*)/2.
Matrix hermitian_function(const Matrix& a, const std::function<double(double)>& f);
Matrix psd_sqrt(const Matrix& a);  // eigenvalues clipped at 0 first

class HermitianOperator {
public:
    explicit HermitianOperator(const Matrix& m, double tol = kHermiticityTol);
    const Matrix& matrix() const { return m_; }
    Index dim() const { return m_.rows(); }

private:
    Matrix m_;
};

class DensityOperator {
public:
    // Eigenvalues in [-1e-10, 0) are clipped to 0; anything more negative is rejected.
    explicit DensityOperator(const Matrix& m, double tol = kHermiticityTol);
    const Matrix& matrix() const { return m_; }
    Index dim() const { return m_.rows(); }
    const RealVector& eigenvalues() const { return evals_; }  // ascending

    static DensityOperator maximally_mixed(Index dim);

private:
    Matrix m_;
    RealVector evals_;
};

class FaithfulState {
public:
    explicit FaithfulState(const DensityOperator& rho, double threshold = kFaithfulThreshold);
    explicit FaithfulState(const Matrix& rho, double threshold = kFaithfulThreshold)
        : FaithfulState(DensityOperator(rho), threshold) {}

    const Matrix& matrix() const { return rho_; }
    Index dim() const { return rho_.rows(); }
    const RealVector& eigenvalues() const { return s_; }  // descending
    const Matrix& eigenvectors() const { return u_; }     // columns match eigenvalues()
    double s_min() const { return s_(s_.size() - 1); }

    Matrix power(double p) const;
    Matrix to_eigenbasis(const Matrix& x) const { return u_.adjoint() * x * u_; }
    Matrix from_eigenbasis(const Matrix& x) const { return u_ * x * u_.adjoint(); }

private:
    Matrix rho_;
    RealVector s_;
    Matrix u_;
};

enum class InnerProductKind { GNS, KMS, BKM };

const char* to_string(InnerProductKind kind);

cplx inner_product(InnerProductKind kind, const FaithfulState& sigma, const Matrix& x, const Matrix& y);

struct SpectralTransform {
    enum class Kind { delta_power, tanh_log_quarter, bkm_M, bkm_M_inverse };
    Kind kind;
    double p = 0.0;

    static SpectralTransform delta_power(double p) { return {Kind::delta_power, p}; }
    static SpectralTransform tanh_log_quarter() { return {Kind::tanh_log_quarter, 0.0}; }
    static SpectralTransform bkm_M() { return {Kind::bkm_M, 0.0}; }
    static SpectralTransform bkm_M_inverse() { return {Kind::bkm_M_inverse, 0.0}; }
};

// Coefficient multiplying entry (i,j) in the eigenbasis of sigma.
double transform_coefficient(const SpectralTransform& t, double si, double sj);
// Logarithmic mean (si - sj)/(ln si - ln sj) with the diagonal limit si.
double log_mean(double si, double sj);

Matrix spectral_transform(const SpectralTransform& t, const FaithfulState& sigma, const Matrix& x);

// sigma^{power/2} X sigma^{power/2}
Matrix gamma_map(double power, const FaithfulState& sigma, const Matrix& x);

class SuperOperator {
public:
    SuperOperator() = default;
    SuperOperator(Index dim, Matrix m);

    static SuperOperator identity(Index dim);
    // X -> A X B
    static SuperOperator sandwich(const Matrix& a, const Matrix& b);

    Index dim() const { return dim_; }
    const Matrix& matrix() const { return m_; }
    Matrix apply(const Matrix& x) const;

    SuperOperator adjoint() const;  // Hilbert-Schmidt adjoint
    SuperOperator operator*(const SuperOperator& rhs) const;  // composition, rhs first
    SuperOperator operator+(const SuperOperator& rhs) const;
    SuperOperator operator-(const SuperOperator& rhs) const;
    SuperOperator operator*(cplx c) const;

private:
    Index dim_ = 0;
    Matrix m_;
};

using MatrixMap = std::function<Matrix(const Matrix&)>;

SuperOperator to_superoperator(Index dim, const MatrixMap& map);
Matrix apply(const SuperOperator& s, const Matrix& x);

SuperOperator spectral_superoperator(const SpectralTransform& t, const FaithfulState& sigma);
SuperOperator gamma_superoperator(double power, const FaithfulState& sigma);
// G with <X,Y>_kind = vec(X)^dagger G vec(Y).
SuperOperator gram_superoperator(InnerProductKind kind, const FaithfulState& sigma);
SuperOperator gram_inverse_superoperator(InnerProductKind kind, const FaithfulState& sigma);

}  // namespace qdev
