#include "qdev/lindblad.hpp"

#include <cmath>
#include <string>

namespace qdev {

namespace {

const cplx I_unit(0.0, 1.0);

}  // namespace

Lindbladian::Lindbladian(const Matrix& hamiltonian, std::vector<Matrix> jumps)
    : h_(HermitianOperator(hamiltonian).matrix()), jumps_(std::move(jumps)) {
    const Index d = h_.rows();
    if (d == 0) throw DimensionMismatch("Lindbladian needs a non-empty Hamiltonian");
    k_ = Matrix::Zero(d, d);
    for (std::size_t j = 0; j < jumps_.size(); ++j) {
        if (jumps_[j].rows() != d || jumps_[j].cols() != d)
            throw DimensionMismatch("jump operator has the wrong dimension", "jump=" + std::to_string(j));
        k_ += jumps_[j].adjoint() * jumps_[j];
    }
}

Matrix apply_generator(const Lindbladian& l, const Matrix& x) {
    if (x.rows() != l.dim() || x.cols() != l.dim()) throw DimensionMismatch("apply_generator: operand size");
    const Matrix& h = l.hamiltonian();
    const Matrix& k = l.jump_norm_sum();
    Matrix out = I_unit * (h * x - x * h) - 0.5 * (k * x + x * k);
    for (const Matrix& lj : l.jumps()) out += lj.adjoint() * x * lj;
    return out;
}

Matrix apply_adjoint_generator(const Lindbladian& l, const Matrix& rho) {
    if (rho.rows() != l.dim() || rho.cols() != l.dim()) throw DimensionMismatch("apply_adjoint_generator: operand size");
    const Matrix& h = l.hamiltonian();
    const Matrix& k = l.jump_norm_sum();
    Matrix out = -I_unit * (h * rho - rho * h) - 0.5 * (k * rho + rho * k);
    for (const Matrix& lj : l.jumps()) out += lj * rho * lj.adjoint();
    return out;
}

SuperOperator heisenberg_superoperator(const Lindbladian& l) {
    const Index d = l.dim();
    const Matrix id = Matrix::Identity(d, d);
    const Matrix& h = l.hamiltonian();
    const Matrix& k = l.jump_norm_sum();
    Matrix m = I_unit * (kron(id, h) - kron(h.transpose(), id)) - 0.5 * (kron(id, k) + kron(k.transpose(), id));
    for (const Matrix& lj : l.jumps()) m += kron(lj.transpose(), lj.adjoint());
    return SuperOperator(d, std::move(m));
}

SuperOperator schrodinger_superoperator(const Lindbladian& l) {
    return heisenberg_superoperator(l).adjoint();
}

GeneratorContext::GeneratorContext(Lindbladian l, DensityOperator st, std::optional<FaithfulState> faithful,
                                   SuperOperator heis, SuperOperator schr, Index kernel_dimension)
    : lindbladian(std::move(l)),
      state(std::move(st)),
      heisenberg(std::move(heis)),
      schrodinger(std::move(schr)),
      kernel_dim(kernel_dimension),
      faithful_(std::move(faithful)) {
    primitive = kernel_dim == 1 && faithful_.has_value();
    if (faithful_) bohr = bohr_frequencies(*faithful_, lindbladian.jumps());
}

const FaithfulState& GeneratorContext::sigma() const {
    if (!faithful_) {
        throw NotFaithfulError("stationary state is not faithful; sigma-weighted operations are undefined",
                               "s_min=" + std::to_string(state.eigenvalues()(0)));
    }
    return *faithful_;
}

GeneratorContext stationary_state(const Lindbladian& l) {
    const Index d = l.dim();
    SuperOperator heis = heisenberg_superoperator(l);
    SuperOperator schr = heis.adjoint();
    const Matrix& s = schr.matrix();

    Eigen::BDCSVD<Matrix> svd(s, Eigen::ComputeFullU | Eigen::ComputeFullV);
    const RealVector& sv = svd.singularValues();
    const double threshold = 1e-9 * sv(0);
    Index kdim = 0;
    for (Index i = 0; i < sv.size(); ++i)
        if (sv(i) <= threshold) ++kdim;
    if (kdim == 0) throw NumericalError("Schrodinger superoperator has no kernel within tolerance");

    // Spectral projector onto the kernel along the range, applied to id/d; the
    // image is the stationary state of maximal support.
    Matrix right = svd.matrixV().rightCols(kdim);
    Matrix left = svd.matrixU().rightCols(kdim);
    Vector id = vec(Matrix::Identity(d, d)) / static_cast<double>(d);
    Matrix overlap = left.adjoint() * right;
    Vector coeffs = overlap.fullPivLu().solve(left.adjoint() * id);
    Matrix sigma = unvec(right * coeffs, d);
    sigma = hermitian_part(sigma);
    const cplx tr = sigma.trace();
    if (std::abs(tr) < 1e-12) throw NumericalError("stationary kernel element has vanishing trace");
    sigma /= tr.real();

    Eigen::SelfAdjointEigenSolver<Matrix> es(sigma);
    RealVector ev = es.eigenvalues();
    if (ev(0) < -1e-8) throw NumericalError("stationary state is not positive semidefinite",
                                            "min_eigenvalue=" + std::to_string(ev(0)));
    ev = ev.cwiseMax(0.0);
    sigma = es.eigenvectors() * ev.cast<cplx>().asDiagonal() * es.eigenvectors().adjoint();
    sigma /= sigma.trace().real();
    sigma = hermitian_part(sigma);

    const double residual = max_norm(schr.apply(sigma));
    if (residual > 1e-9 * std::max(1.0, max_norm(s))) {
        throw NumericalError("stationary state residual exceeds tolerance", "residual=" + std::to_string(residual));
    }

    DensityOperator st(sigma);
    std::optional<FaithfulState> faithful;
    if (st.eigenvalues()(0) > kFaithfulThreshold) faithful.emplace(st);
    if (kdim > 1 && !faithful) throw NumericalError("no faithful stationary state", "kernel_dim=" + std::to_string(kdim));
    return GeneratorContext(l, st, std::move(faithful), std::move(heis), std::move(schr), kdim);
}

SuperOperator dual_superoperator(InnerProductKind kind, const FaithfulState& sigma, const SuperOperator& s) {
    if (s.dim() != sigma.dim()) throw DimensionMismatch("dual_superoperator: dimension mismatch");
    return gram_inverse_superoperator(kind, sigma) * s.adjoint() * gram_superoperator(kind, sigma);
}

SuperOperator dual_superoperator(InnerProductKind kind, const GeneratorContext& ctx, const SuperOperator& s) {
    return dual_superoperator(kind, ctx.sigma(), s);
}

DetailedBalance check_detailed_balance(InnerProductKind kind, const FaithfulState& sigma, const SuperOperator& s) {
    const double deviation = max_norm(s.matrix() - dual_superoperator(kind, sigma, s).matrix());
    return {deviation <= 1e-8 * max_norm(s.matrix()), deviation};
}

DetailedBalance check_detailed_balance(InnerProductKind kind, const GeneratorContext& ctx) {
    return check_detailed_balance(kind, ctx.sigma(), ctx.heisenberg);
}

std::optional<std::vector<double>> bohr_frequencies(const FaithfulState& sigma, const std::vector<Matrix>& jumps) {
    std::vector<double> omega;
    omega.reserve(jumps.size());
    for (const Matrix& lj : jumps) {
        const double n2 = lj.squaredNorm();
        if (n2 == 0.0) {
            omega.push_back(0.0);
            continue;
        }
        Matrix dl = spectral_transform(SpectralTransform::delta_power(1.0), sigma, lj);
        const cplx c = (lj.adjoint() * dl).trace() / n2;
        if (!(c.real() > 0.0) || std::abs(c.imag()) > 1e-8 * std::abs(c)) return std::nullopt;
        const double residual = (dl - c.real() * lj).norm() / dl.norm();
        if (residual > 1e-8) return std::nullopt;
        omega.push_back(-std::log(c.real()));
    }
    return omega;
}

std::optional<std::vector<double>> bohr_frequencies(const GeneratorContext& ctx) {
    return bohr_frequencies(ctx.sigma(), ctx.lindbladian.jumps());
}

double kms_alignment_residual(const FaithfulState& sigma, const std::vector<Matrix>& jumps) {
    double worst = 0.0;
    for (const Matrix& lj : jumps) {
        Matrix t = spectral_transform(SpectralTransform::delta_power(0.5), sigma, lj.adjoint());
        worst = std::max(worst, max_norm(t - lj) / std::max(1.0, max_norm(lj)));
    }
    return worst;
}

Matrix kms_canonical_hamiltonian(const FaithfulState& sigma, const std::vector<Matrix>& jumps) {
    const double residual = kms_alignment_residual(sigma, jumps);
    if (residual > 1e-8) {
        throw ValidationError("jumps are not aligned: sigma^{1/2} L^* sigma^{-1/2} != L",
                              "residual=" + std::to_string(residual));
    }
    Matrix k = Matrix::Zero(sigma.dim(), sigma.dim());
    for (const Matrix& lj : jumps) k += lj.adjoint() * lj;
    // Sign fixed by KMS symmetry under L(X) = i[H,X] + ...; see the README.
    Matrix h = -0.5 * I_unit * spectral_transform(SpectralTransform::tanh_log_quarter(), sigma, k);
    return hermitian_part(h);
}

Matrix kms_canonical_hamiltonian(const GeneratorContext& ctx) {
    return kms_canonical_hamiltonian(ctx.sigma(), ctx.lindbladian.jumps());
}

double dirichlet_form(const GeneratorContext& ctx, const Matrix& x) {
    Matrix lx = apply_generator(ctx.lindbladian, x);
    return -inner_product(InnerProductKind::KMS, ctx.sigma(), x, lx).real();
}

double fisher_information(const GeneratorContext& ctx, const Matrix& rho) {
    const FaithfulState& sigma = ctx.sigma();
    if (rho.rows() != sigma.dim() || rho.cols() != sigma.dim()) throw DimensionMismatch("fisher_information: size");
    Matrix x = gamma_map(-0.5, sigma, psd_sqrt(rho));
    return dirichlet_form(ctx, x);
}

bool gauge_equivalence_check(const Lindbladian& l1, const Lindbladian& l2, double tol) {
    if (l1.dim() != l2.dim()) throw DimensionMismatch("gauge_equivalence_check: dimension mismatch");
    return max_norm(heisenberg_superoperator(l1).matrix() - heisenberg_superoperator(l2).matrix()) <= tol;
}

}  // namespace qdev
