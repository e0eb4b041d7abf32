// Random generators and small oracles shared by the unit tests.
#pragma once

#include <cmath>
#include <random>

#include "qdev/spectral.hpp"

namespace qdev::testing {

inline Matrix random_matrix(std::mt19937_64& rng, Index d) {
    std::normal_distribution<double> n(0.0, 1.0);
    Matrix m(d, d);
    for (Index i = 0; i < d; ++i)
        for (Index j = 0; j < d; ++j) m(i, j) = cplx(n(rng), n(rng));
    return m;
}

inline Matrix random_hermitian(std::mt19937_64& rng, Index d) {
    Matrix m = random_matrix(rng, d);
    return 0.5 * (m + m.adjoint());
}

inline Matrix random_unitary(std::mt19937_64& rng, Index d) {
    Eigen::HouseholderQR<Matrix> qr(random_matrix(rng, d));
    return qr.householderQ() * Matrix::Identity(d, d);
}

// Full-rank density matrix with eigenvalues bounded below by floor/d.
inline Matrix random_density(std::mt19937_64& rng, Index d, double floor = 0.05) {
    Matrix a = random_matrix(rng, d);
    Matrix rho = a * a.adjoint();
    rho /= rho.trace().real();
    rho = (1.0 - floor) * rho + floor * Matrix::Identity(d, d) / static_cast<double>(d);
    return 0.5 * (rho + rho.adjoint());
}

// Pure-ish density matrices (rank deficient allowed).
inline Matrix random_rank_density(std::mt19937_64& rng, Index d, Index rank) {
    std::normal_distribution<double> n(0.0, 1.0);
    Matrix a(d, rank);
    for (Index i = 0; i < d; ++i)
        for (Index j = 0; j < rank; ++j) a(i, j) = cplx(n(rng), n(rng));
    Matrix rho = a * a.adjoint();
    rho /= rho.trace().real();
    return 0.5 * (rho + rho.adjoint());
}

inline Matrix diag(std::initializer_list<double> v) {
    Matrix m = Matrix::Zero(static_cast<Index>(v.size()), static_cast<Index>(v.size()));
    Index i = 0;
    for (double x : v) m(i, i) = x, ++i;
    return m;
}

inline Matrix pauli_x() {
    Matrix m = Matrix::Zero(2, 2);
    m(0, 1) = m(1, 0) = 1.0;
    return m;
}

inline Matrix pauli_z() { return diag({1.0, -1.0}); }

}  // namespace qdev::testing
