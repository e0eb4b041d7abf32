#include "qdev/models.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace qdev::models {

Lindbladian depolarizing(const FaithfulState& sigma) {
    const Index d = sigma.dim();
    const Matrix& u = sigma.eigenvectors();
    std::vector<Matrix> jumps;
    jumps.reserve(static_cast<std::size_t>(d * d));
    for (Index x = 0; x < d; ++x)
        for (Index y = 0; y < d; ++y)
            jumps.push_back(std::sqrt(sigma.eigenvalues()(x)) * u.col(x) * u.col(y).adjoint());
    return Lindbladian(Matrix::Zero(d, d), std::move(jumps));
}

std::vector<Matrix> matrix_unit_derivations(Index dim) {
    std::vector<Matrix> out;
    for (Index x = 0; x < dim; ++x)
        for (Index y = 0; y < dim; ++y)
            if (x != y) out.push_back(matrix_unit(dim, x, y));
    return out;
}

ClassicalChain::ClassicalChain(const RealMatrix& rates) : q_(rates) {
    const Index n = q_.rows();
    if (n == 0 || q_.cols() != n) throw ValidationError("rate matrix must be square and non-empty");
    const double scale = std::max(1.0, q_.cwiseAbs().maxCoeff());
    for (Index i = 0; i < n; ++i) {
        for (Index j = 0; j < n; ++j)
            if (i != j && q_(i, j) < 0.0)
                throw ValidationError("negative off-diagonal rate", "entry=(" + std::to_string(i) + "," + std::to_string(j) + ")");
        if (std::abs(q_.row(i).sum()) > 1e-12 * scale)
            throw ValidationError("rate matrix row does not sum to zero", "row=" + std::to_string(i));
    }
    RealMatrix a(n + 1, n);
    a.topRows(n) = q_.transpose();
    a.row(n).setOnes();
    RealVector rhs = RealVector::Zero(n + 1);
    rhs(n) = 1.0;
    pi_ = a.colPivHouseholderQr().solve(rhs);
    if ((pi_.transpose() * q_).cwiseAbs().maxCoeff() > 1e-12 * scale || pi_.minCoeff() <= 0.0)
        throw ValidationError("rate matrix has no unique positive stationary distribution");
    reversible_ = true;
    for (Index i = 0; i < n; ++i)
        for (Index j = 0; j < n; ++j)
            if (std::abs(pi_(i) * q_(i, j) - pi_(j) * q_(j, i)) > 1e-12 * scale) reversible_ = false;
}

double ClassicalChain::spectral_gap() const {
    // Additive symmetrization in L^2(pi), then similarity to a symmetric matrix.
    const Index n = size();
    RealVector sq = pi_.array().sqrt();
    RealMatrix s(n, n);
    for (Index i = 0; i < n; ++i)
        for (Index j = 0; j < n; ++j) s(i, j) = -0.5 * (sq(i) * q_(i, j) / sq(j) + sq(j) * q_(j, i) / sq(i));
    Eigen::SelfAdjointEigenSolver<RealMatrix> es(s);
    return n > 1 ? es.eigenvalues()(1) : 0.0;
}

double ClassicalChain::dirichlet_form(const RealVector& g) const {
    double acc = 0.0;
    for (Index i = 0; i < size(); ++i)
        for (Index j = 0; j < size(); ++j) acc += pi_(i) * g(i) * q_(i, j) * g(j);
    return -acc;
}

Lindbladian classical_embedding(const ClassicalChain& chain, double dephasing) {
    const Index n = chain.size();
    const RealMatrix& q = chain.rates();
    std::vector<Matrix> jumps;
    for (Index i = 0; i < n; ++i)
        for (Index j = 0; j < n; ++j)
            if (i != j && q(i, j) > 0.0) jumps.push_back(std::sqrt(q(i, j)) * matrix_unit(n, j, i));
    double kappa = dephasing;
    if (kappa < 0.0) kappa = 2.0 * (-q.diagonal()).maxCoeff();
    if (kappa > 0.0)
        for (Index i = 0; i < n; ++i) jumps.push_back(std::sqrt(kappa) * matrix_unit(n, i, i));
    return Lindbladian(Matrix::Zero(n, n), std::move(jumps));
}

Lindbladian tensor_product(const std::vector<Lindbladian>& factors, Index dimension_guard) {
    if (factors.empty()) throw ValidationError("tensor_product needs at least one factor");
    Index total = 1;
    for (const Lindbladian& f : factors) {
        total *= f.dim();
        if (total > dimension_guard)
            throw ValidationError("tensor product exceeds the dimension guard",
                                  "guard=" + std::to_string(dimension_guard));
    }
    Matrix h = Matrix::Zero(total, total);
    std::vector<Matrix> jumps;
    Index before = 1;
    for (const Lindbladian& f : factors) {
        const Index after = total / (before * f.dim());
        const Matrix ib = Matrix::Identity(before, before);
        const Matrix ia = Matrix::Identity(after, after);
        h += kron(kron(ib, f.hamiltonian()), ia);
        for (const Matrix& lj : f.jumps()) jumps.push_back(kron(kron(ib, lj), ia));
        before *= f.dim();
    }
    return Lindbladian(h, std::move(jumps));
}

namespace {

Index ipow(Index base, int e) {
    Index r = 1;
    for (int i = 0; i < e; ++i) r *= base;
    return r;
}

// Digit of `site` in a register index; site 0 is the most significant.
Index digit(Index index, int site, int n_sites, Index d) {
    return (index / ipow(d, n_sites - 1 - site)) % d;
}

Index remove_digit(Index index, int site, int n_sites, Index d) {
    const Index low = ipow(d, n_sites - 1 - site);
    return (index / (low * d)) * low + index % low;
}

Index insert_digit(Index index, Index value, int site, int n_sites, Index d) {
    const Index low = ipow(d, n_sites - 1 - site);
    return (index / low) * low * d + value * low + index % low;
}

}  // namespace

Matrix embed(const Matrix& op, const std::vector<int>& support, int n_sites, Index local_dim) {
    const Index dim = ipow(local_dim, n_sites);
    const Index sub = ipow(local_dim, static_cast<int>(support.size()));
    if (op.rows() != sub || op.cols() != sub) throw DimensionMismatch("embed: operator size does not match support");
    Matrix out = Matrix::Zero(dim, dim);
    for (Index r = 0; r < dim; ++r)
        for (Index c = 0; c < dim; ++c) {
            bool match = true;
            for (int s = 0; s < n_sites && match; ++s) {
                if (std::find(support.begin(), support.end(), s) != support.end()) continue;
                match = digit(r, s, n_sites, local_dim) == digit(c, s, n_sites, local_dim);
            }
            if (!match) continue;
            Index sr = 0, sc = 0;
            for (int s : support) {
                sr = sr * local_dim + digit(r, s, n_sites, local_dim);
                sc = sc * local_dim + digit(c, s, n_sites, local_dim);
            }
            out(r, c) = op(sr, sc);
        }
    return out;
}

Matrix partial_trace_site(const Matrix& rho, int site, int n_sites, Index local_dim) {
    const Index rest = ipow(local_dim, n_sites - 1);
    Matrix out = Matrix::Zero(rest, rest);
    for (Index a = 0; a < rest; ++a)
        for (Index b = 0; b < rest; ++b)
            for (Index k = 0; k < local_dim; ++k)
                out(a, b) += rho(insert_digit(a, k, site, n_sites, local_dim), insert_digit(b, k, site, n_sites, local_dim));
    return out;
}

Matrix tensor_identity_at(const Matrix& rho_rest, int site, int n_sites, Index local_dim) {
    const Index dim = ipow(local_dim, n_sites);
    Matrix out = Matrix::Zero(dim, dim);
    for (Index i = 0; i < dim; ++i)
        for (Index j = 0; j < dim; ++j)
            if (digit(i, site, n_sites, local_dim) == digit(j, site, n_sites, local_dim))
                out(i, j) = rho_rest(remove_digit(i, site, n_sites, local_dim), remove_digit(j, site, n_sites, local_dim));
    return out;
}

Matrix CommutingHamiltonian::total() const {
    const Index dim = ipow(local_dim, n_sites);
    Matrix h = Matrix::Zero(dim, dim);
    for (const LocalTerm& t : terms) h += embed(t.h, t.support, n_sites, local_dim);
    return h;
}

void CommutingHamiltonian::validate() const {
    if (n_sites < 1 || local_dim < 1) throw ValidationError("commuting Hamiltonian needs sites and a local dimension");
    std::vector<Matrix> embedded;
    for (std::size_t k = 0; k < terms.size(); ++k) {
        const LocalTerm& t = terms[k];
        const std::string ctx = "term=" + std::to_string(k);
        if (t.support.empty() || static_cast<int>(t.support.size()) > r_max)
            throw ValidationError("local term support size out of range", ctx);
        for (int s : t.support)
            if (s < 0 || s >= n_sites) throw ValidationError("local term support outside the lattice", ctx);
        if (!is_hermitian(t.h)) throw ValidationError("local term is not Hermitian", ctx);
        if (operator_norm(t.h) > 1.0 + 1e-12) throw ValidationError("local term has norm above 1", ctx);
        embedded.push_back(embed(t.h, t.support, n_sites, local_dim));
    }
    for (std::size_t a = 0; a < embedded.size(); ++a)
        for (std::size_t b = a + 1; b < embedded.size(); ++b)
            if (max_norm(embedded[a] * embedded[b] - embedded[b] * embedded[a]) > 1e-10)
                throw ValidationError("local terms do not commute",
                                      "terms=" + std::to_string(a) + "," + std::to_string(b));
}

namespace {

Matrix choi_matrix(const SuperOperator& channel) {
    const Index d = channel.dim();
    const SuperOperator schr = channel.adjoint();
    Matrix c(d * d, d * d);
    for (Index i = 0; i < d; ++i)
        for (Index j = 0; j < d; ++j) c.block(i * d, j * d, d, d) = schr.apply(matrix_unit(d, i, j));
    return hermitian_part(c);
}

}  // namespace

RealVector choi_eigenvalues(const SuperOperator& channel) {
    Eigen::SelfAdjointEigenSolver<Matrix> es(choi_matrix(channel));
    return es.eigenvalues();
}

std::vector<Matrix> kraus_operators(const SuperOperator& channel, double tol) {
    const Index d = channel.dim();
    Eigen::SelfAdjointEigenSolver<Matrix> es(choi_matrix(channel));
    const double top = std::max(1.0, es.eigenvalues().cwiseAbs().maxCoeff());
    if (es.eigenvalues()(0) < -1e-10 * top)
        throw ValidationError("map is not completely positive", "min_choi_eigenvalue=" + std::to_string(es.eigenvalues()(0)));
    std::vector<Matrix> kraus;
    for (Index k = es.eigenvalues().size() - 1; k >= 0; --k) {
        const double mu = es.eigenvalues()(k);
        if (mu <= tol * top) break;
        kraus.push_back(std::sqrt(mu) * unvec(es.eigenvectors().col(k), d));
    }
    return kraus;
}

Lindbladian channel_generator(const SuperOperator& channel) {
    const Index d = channel.dim();
    std::vector<Matrix> kraus = kraus_operators(channel);
    Matrix sum = Matrix::Zero(d, d);
    for (const Matrix& k : kraus) sum += k.adjoint() * k;
    if (max_norm(sum - Matrix::Identity(d, d)) > 1e-9) throw ValidationError("channel is not unital");
    return Lindbladian(Matrix::Zero(d, d), std::move(kraus));
}

HeatBath heat_bath(const CommutingHamiltonian& h, Index dimension_guard) {
    h.validate();
    const Index dim = ipow(h.local_dim, h.n_sites);
    if (dim > dimension_guard)
        throw ValidationError("heat-bath register exceeds the dimension guard", "guard=" + std::to_string(dimension_guard));
    const Matrix total = h.total();
    Matrix omega = hermitian_function(total, [&](double e) { return std::exp(-h.beta * e); });
    omega /= omega.trace().real();
    const Matrix omega_half = psd_sqrt(omega);

    std::vector<SuperOperator> channels;
    std::vector<Matrix> jumps;
    for (int v = 0; v < h.n_sites; ++v) {
        SuperOperator schr;
        if (h.n_sites == 1) {
            schr = to_superoperator(dim, [&](const Matrix& rho) -> Matrix { return rho.trace() * omega; });
        } else {
            const Matrix omega_rest = partial_trace_site(omega, v, h.n_sites, h.local_dim);
            const Matrix inv_half = hermitian_function(omega_rest, [](double x) { return 1.0 / std::sqrt(x); });
            const Matrix a = omega_half * tensor_identity_at(inv_half, v, h.n_sites, h.local_dim);
            schr = to_superoperator(dim, [&](const Matrix& rho) -> Matrix {
                const Matrix rest = partial_trace_site(rho, v, h.n_sites, h.local_dim);
                return a * tensor_identity_at(rest, v, h.n_sites, h.local_dim) * a.adjoint();
            });
        }
        SuperOperator channel = schr.adjoint();
        for (Matrix& k : kraus_operators(channel)) jumps.push_back(std::move(k));
        channels.push_back(std::move(channel));
    }
    return {Lindbladian(Matrix::Zero(dim, dim), std::move(jumps)), omega, std::move(channels)};
}

AppendixB appendix_b_fixtures(const AppendixBParams& prm) {
    using Eigen::Vector2cd;
    const Vector2cd u1(std::cos(prm.theta_u), std::sin(prm.theta_u));
    const Vector2cd u2(-std::sin(prm.theta_u), std::cos(prm.theta_u));
    const Vector2cd v1(std::cos(prm.phi_1), std::sin(prm.phi_1));
    const Vector2cd v2(std::cos(prm.phi_2), std::sin(prm.phi_2));
    const double a = std::norm(v2.dot(u1));
    const double b = std::norm(v1.dot(u2));
    const double v12 = std::abs(v1.dot(v2));
    if (v12 < 1e-8) throw ValidationError("appendix-b: v_1 and v_2 must not be orthogonal");
    if (std::abs(a + b - 1.0) < 1e-8) throw ValidationError("appendix-b: a + b must differ from 1");
    if (a * b < 1e-12) throw ValidationError("appendix-b: a b must be nonzero");
    if (std::abs(a - b) < 1e-8) throw ValidationError("appendix-b: a must differ from b");
    if (!(prm.p > 0.0 && prm.p < 0.5)) throw ValidationError("appendix-b: p must lie in (0, 1/2)");

    AppendixB out;
    out.a = a;
    out.b = b;
    const Matrix k1 = v1 * u1.adjoint();
    const Matrix k2 = v2 * u2.adjoint();
    out.phi = SuperOperator::sandwich(k1.adjoint(), k1) + SuperOperator::sandwich(k2.adjoint(), k2);
    out.sigma_phi = a / (a + b) * (v1 * v1.adjoint()) + b / (a + b) * (v2 * v2.adjoint());
    if (max_norm(out.sigma_phi - Matrix::Identity(2, 2) / 2.0) < 1e-8)
        throw ValidationError("appendix-b: sigma must differ from id/2");

    const FaithfulState sigma(out.sigma_phi);
    out.psi = dual_superoperator(InnerProductKind::KMS, sigma, out.phi) * out.phi;
    out.psi_tilde = spectral_superoperator(SpectralTransform::bkm_M_inverse(), sigma) * out.psi.adjoint() *
                    gamma_superoperator(1.0, sigma);

    const double p = prm.p;
    Matrix pk1 = Matrix::Zero(2, 2);
    pk1(0, 0) = std::sqrt(p);
    pk1(1, 1) = std::sqrt(1.0 - p);
    Matrix pk2 = Matrix::Zero(2, 2);
    pk2(0, 1) = std::sqrt(p);
    pk2(1, 0) = std::sqrt(1.0 - p);
    out.p_channel = SuperOperator::sandwich(pk1.adjoint(), pk1) + SuperOperator::sandwich(pk2.adjoint(), pk2);
    out.p_sigma = Matrix::Zero(2, 2);
    out.p_sigma(0, 0) = p;
    out.p_sigma(1, 1) = 1.0 - p;
    return out;
}

}  // namespace qdev::models
