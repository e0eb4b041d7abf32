#include "qdev/inequalities.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "qdev/trajectories.hpp"

namespace qdev {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

Matrix log_of(const FaithfulState& sigma) {
    RealVector l = sigma.eigenvalues().array().log();
    return sigma.eigenvectors() * l.cast<cplx>().asDiagonal() * sigma.eigenvectors().adjoint();
}

// Logarithm on the support; eigenvalues at or below clip contribute zero.
Matrix support_log(const Matrix& rho, double clip) {
    Eigen::SelfAdjointEigenSolver<Matrix> es(hermitian_part(rho));
    RealVector l = es.eigenvalues();
    for (Index i = 0; i < l.size(); ++i) l(i) = l(i) > clip ? std::log(l(i)) : 0.0;
    return es.eigenvectors() * l.cast<cplx>().asDiagonal() * es.eigenvectors().adjoint();
}

double xlogx_trace(const Matrix& p) {
    Eigen::SelfAdjointEigenSolver<Matrix> es(hermitian_part(p), Eigen::EigenvaluesOnly);
    double out = 0.0;
    for (Index i = 0; i < es.eigenvalues().size(); ++i) {
        const double x = es.eigenvalues()(i);
        if (x > 0.0) out += x * std::log(x);
    }
    return out;
}

void check_square(const Matrix& m, Index d, const char* what) {
    if (m.rows() != d || m.cols() != d) throw DimensionMismatch("operator dimension differs from the model", what);
}

Matrix commutator(const Matrix& a, const Matrix& b) { return a * b - b * a; }

}  // namespace

double spectral_gap(const GeneratorContext& ctx) {
    const FaithfulState& sigma = ctx.sigma();
    const Matrix g = gamma_superoperator(0.5, sigma).matrix() * ctx.heisenberg.matrix() *
                     gamma_superoperator(-0.5, sigma).matrix();
    const Matrix h = -hermitian_part(g);
    // Gamma^{1/2}(id) = sigma^{1/2} spans the kernel; shift it past the rest of the spectrum.
    Vector v = vec(sigma.power(0.5));
    v.normalize();
    const double shift = h.norm() + 1.0;
    Matrix m = h + shift * v * v.adjoint();
    Eigen::SelfAdjointEigenSolver<Matrix> es(m, Eigen::EigenvaluesOnly);
    if (es.info() != Eigen::Success) throw NumericalError("eigensolver failed for the symmetrized generator");
    return std::max(0.0, es.eigenvalues()(0));
}

const char* to_string(EntropyKind kind) {
    switch (kind) {
        case EntropyKind::variance: return "variance";
        case EntropyKind::ent2: return "ent2";
        case EntropyKind::relative_entropy: return "relative_entropy";
        case EntropyKind::entropy_production: return "entropy_production";
    }
    return "?";
}

double entropy_functional(EntropyKind kind, const GeneratorContext& ctx, const Matrix& argument) {
    const FaithfulState& sigma = ctx.sigma();
    const Index d = sigma.dim();
    check_square(argument, d, "argument");
    switch (kind) {
        case EntropyKind::variance: {
            HermitianOperator x(argument);
            Matrix y = x.matrix();
            y.diagonal().array() -= (sigma.matrix() * y).trace().real();
            return inner_product(InnerProductKind::KMS, sigma, y, y).real();
        }
        case EntropyKind::ent2: {
            HermitianOperator x(argument);
            const Matrix y = gamma_map(0.5, sigma, x.matrix());
            const Matrix p = y * y;
            const double n2 = p.trace().real();
            if (n2 <= 0.0) return 0.0;
            return xlogx_trace(p) - (p * log_of(sigma)).trace().real() - n2 * std::log(n2);
        }
        case EntropyKind::relative_entropy: {
            DensityOperator rho(argument);
            return xlogx_trace(rho.matrix()) - (rho.matrix() * log_of(sigma)).trace().real();
        }
        case EntropyKind::entropy_production: {
            DensityOperator rho(argument);
            const Matrix flow = apply_adjoint_generator(ctx.lindbladian, rho.matrix());
            return -(flow * (support_log(rho.matrix(), 1e-14) - log_of(sigma))).trace().real();
        }
    }
    return 0.0;
}

double lsi_depolarizing(const FaithfulState& sigma) {
    // With x = 1 - 2 s_min, ln(1/s_min - 1) = 2 atanh(x).
    const double x = 1.0 - 2.0 * sigma.s_min();
    if (std::abs(x) < 1e-6) return 0.5 * (1.0 - x * x / 3.0);
    return x / (2.0 * std::atanh(x));
}

double ti_from_lsi(double alpha2) {
    if (!(alpha2 > 0.0) || !std::isfinite(alpha2)) throw ValidationError("LSI constant must be positive", "alpha2");
    return 1.0 / (8.0 * alpha2 * alpha2);
}

const char* to_string(Provenance p) {
    switch (p) {
        case Provenance::computed: return "computed";
        case Provenance::closed_form: return "closed_form";
        case Provenance::user_supplied: return "user_supplied";
    }
    return "?";
}

bool is_depolarizing(const GeneratorContext& ctx, double tol) {
    const FaithfulState& sigma = ctx.sigma();
    const Index d = sigma.dim();
    SuperOperator target = to_superoperator(d, [&](const Matrix& x) {
        Matrix out = -x;
        out.diagonal().array() += (sigma.matrix() * x).trace();
        return out;
    });
    return max_norm(target.matrix() - ctx.heisenberg.matrix()) <= tol;
}

FunctionalConstants functional_constants(const GeneratorContext& ctx, std::optional<double> user_alpha2,
                                         std::optional<double> user_ti) {
    FunctionalConstants fc;
    fc.spectral_gap = spectral_gap(ctx);
    if (user_alpha2) {
        if (!(*user_alpha2 > 0.0) || !std::isfinite(*user_alpha2))
            throw ValidationError("LSI constant must be positive", "alpha2");
        if (*user_alpha2 > fc.spectral_gap + 1e-9)
            throw ValidationError("LSI constant exceeds the spectral gap", "alpha2");
        fc.lsi_alpha2 = *user_alpha2;
        fc.alpha2_provenance = Provenance::user_supplied;
    } else if (is_depolarizing(ctx)) {
        fc.lsi_alpha2 = lsi_depolarizing(ctx.sigma());
        fc.alpha2_provenance = Provenance::closed_form;
    }
    if (user_ti) {
        if (!(*user_ti > 0.0) || !std::isfinite(*user_ti))
            throw ValidationError("transport-information constant must be positive", "ti_constant");
        fc.ti_constant = *user_ti;
        fc.ti_provenance = Provenance::user_supplied;
    } else if (fc.lsi_alpha2) {
        fc.ti_constant = ti_from_lsi(*fc.lsi_alpha2);
        fc.ti_provenance = fc.alpha2_provenance;
    }
    return fc;
}

LipschitzContext::LipschitzContext(const GeneratorContext& ctx)
    : LipschitzContext(ctx.sigma(), ctx.lindbladian.jumps()) {}

LipschitzContext::LipschitzContext(const FaithfulState& sigma, std::vector<Matrix> derivations)
    : sigma_(sigma), jumps_(std::move(derivations)) {
    if (jumps_.empty()) throw ValidationError("at least one derivation is required", "derivations");
    for (std::size_t j = 0; j < jumps_.size(); ++j)
        check_square(jumps_[j], sigma_.dim(), "derivations");
    auto omega = bohr_frequencies(sigma_, jumps_);
    if (!omega) throw ValidationError("Bohr frequencies absent: a derivation is not an eigenvector of the modular operator", "derivations");
    omega_ = std::move(*omega);
}

double LipschitzContext::weight(Index j) const {
    const double w = omega_.at(static_cast<std::size_t>(j));
    return std::exp(-0.5 * w) + std::exp(0.5 * w);
}

double lipschitz_norm(const LipschitzContext& lip, const Matrix& x) {
    check_square(x, lip.dim(), "X");
    HermitianOperator h(x);
    double s = 0.0;
    for (Index j = 0; j < static_cast<Index>(lip.derivations().size()); ++j) {
        const double n = operator_norm(commutator(lip.derivations()[static_cast<std::size_t>(j)], h.matrix()));
        s += lip.weight(j) * n * n;
    }
    return std::sqrt(s);
}

Matrix tilde_observable(const GeneratorContext& ctx, const Vector& u) {
    const FaithfulState& sigma = ctx.sigma();
    const Index k = ctx.lindbladian.num_jumps();
    if (u.size() != k) throw DimensionMismatch("u must have one entry per jump", "u");
    Matrix lu = Matrix::Zero(sigma.dim(), sigma.dim());
    for (Index j = 0; j < k; ++j) lu += u(j) * ctx.lindbladian.jump(j);
    return spectral_transform(SpectralTransform::delta_power(0.25), sigma, lu.adjoint()) +
           spectral_transform(SpectralTransform::delta_power(-0.25), sigma, lu);
}

Matrix tilde_observable(const GeneratorContext& ctx, const RealVector& u) {
    return tilde_observable(ctx, Vector(u.cast<cplx>()));
}

const char* to_string(ConcentrationVariant v) {
    switch (v) {
        case ConcentrationVariant::ti_gaussian: return "ti_gaussian";
        case ConcentrationVariant::ti_lipschitz: return "ti_lipschitz";
        case ConcentrationVariant::poincare: return "poincare";
        case ConcentrationVariant::depolarizing: return "depolarizing";
        case ConcentrationVariant::tensor: return "tensor";
        case ConcentrationVariant::gibbs: return "gibbs";
    }
    return "?";
}

ConcentrationVariant concentration_variant_from_string(const std::string& s) {
    for (auto v : {ConcentrationVariant::ti_gaussian, ConcentrationVariant::ti_lipschitz, ConcentrationVariant::poincare,
                   ConcentrationVariant::depolarizing, ConcentrationVariant::tensor, ConcentrationVariant::gibbs})
        if (s == to_string(v)) return v;
    throw ValidationError("unknown concentration variant '" + s + "'", "variant");
}

double ConcentrationBound::exponent(double t, double r) const {
    if (!(t >= 0.0) || !std::isfinite(t)) throw ValidationError("t must be finite and nonnegative", "t");
    if (!std::isfinite(r)) throw ValidationError("r must be finite", "r");
    return kappa * t * r * r;
}

double ConcentrationBound::bound(double t, double r) const { return prefactor * std::exp(-exponent(t, r)); }

namespace {

double need(const std::optional<double>& v, const char* name, bool positive = false) {
    if (!v) throw ValidationError(std::string("missing input '") + name + "'", name);
    if (!std::isfinite(*v) || *v < 0.0 || (positive && *v == 0.0))
        throw ValidationError(std::string("input '") + name + (positive ? "' must be positive" : "' must be nonnegative"),
                              name);
    return *v;
}

}  // namespace

ConcentrationBound concentration_bound(ConcentrationVariant variant, const ConcentrationInputs& in) {
    ConcentrationBound b;
    b.variant = variant;
    switch (variant) {
        case ConcentrationVariant::ti_gaussian:
            if (!in.ti_hypothesis_attested)
                throw ValidationError("the transport hypothesis on the observable must be attested by the caller",
                                      "ti_hypothesis_attested");
            b.prefactor = need(in.prefactor, "prefactor");
            b.kappa = 0.25;
            break;
        case ConcentrationVariant::ti_lipschitz: {
            b.prefactor = need(in.prefactor, "prefactor");
            const double c = need(in.ti_constant, "ti_constant");
            const double lip = need(in.lipschitz, "lipschitz");
            b.kappa = 1.0 / (2.0 * (1.0 + c * lip * lip));
            break;
        }
        case ConcentrationVariant::poincare: {
            b.prefactor = need(in.prefactor, "prefactor");
            const double gap = need(in.gap, "gap", true);
            const double s = need(in.sup_norm, "sup_norm");
            b.kappa = gap / (2.0 * (gap + 2.0 * s * s));
            break;
        }
        case ConcentrationVariant::depolarizing: {
            const double d = need(in.dim, "dim");
            if (d < 2.0 || d != std::floor(d)) throw ValidationError("dim must be an integer >= 2", "dim");
            const double s = need(in.pair_sum, "pair_sum");
            // Lipschitz route with C = 1/(8 alpha2^2), alpha2 = (d-2)/(d ln(d-1)) and ||O||_Lip^2 = 2 s;
            // agrees with the closed display for d >= 3 and takes the limit alpha2 = 1/2 at d = 2.
            const double x = 1.0 - 2.0 / d;
            const double alpha2 = std::abs(x) < 1e-6 ? 0.5 : x / (2.0 * std::atanh(x));
            b.kappa = 1.0 / (2.0 * (1.0 + ti_from_lsi(alpha2) * 2.0 * s));
            b.prefactor = d;
            break;
        }
        case ConcentrationVariant::tensor: {
            b.prefactor = need(in.prefactor, "prefactor");
            const double a2 = need(in.alpha2, "alpha2", true);
            const double au = need(in.alpha_u, "alpha_u");
            const double n = need(in.n_factors, "n_factors", true);
            b.kappa = 4.0 * a2 * a2 / (8.0 * a2 * a2 + n * au);
            break;
        }
        case ConcentrationVariant::gibbs: {
            const double c = need(in.ti_constant, "ti_constant");
            const double lo = need(in.ornstein_lipschitz, "ornstein_lipschitz");
            const double beta = need(in.beta, "beta");
            const double hn = need(in.hamiltonian_norm, "hamiltonian_norm");
            b.kappa = 1.0 / (2.0 * (1.0 + c * lo * lo));
            b.prefactor = std::exp(0.5 * beta * hn);
            break;
        }
    }
    return b;
}

double eigenvalue_pair_sum(const Matrix& x) {
    HermitianOperator h(x);
    Eigen::SelfAdjointEigenSolver<Matrix> es(h.matrix(), Eigen::EigenvaluesOnly);
    const RealVector& o = es.eigenvalues();
    double s = 0.0;
    for (Index i = 0; i < o.size(); ++i)
        for (Index j = 0; j < o.size(); ++j) s += (o(i) - o(j)) * (o(i) - o(j));
    return s;
}

InequalityCheck verify_poincare_ti(const GeneratorContext& ctx, const DensityOperator& rho) {
    const FaithfulState& sigma = ctx.sigma();
    check_square(rho.matrix(), sigma.dim(), "rho");
    if (!ctx.primitive) throw ValidationError("generator is not primitive", "model");
    InequalityCheck c;
    const double tn = trace_norm(rho.matrix() - sigma.matrix());
    c.lhs = tn * tn;
    const double gap = spectral_gap(ctx);
    const double fi = fisher_information(ctx, rho.matrix());
    c.rhs = gap > 0.0 ? 4.0 * fi / gap : kInf;
    c.holds = c.lhs <= c.rhs + 1e-9;
    return c;
}

InequalityCheck verify_mlsi(const GeneratorContext& ctx, double alpha1, const DensityOperator& rho) {
    if (!(alpha1 > 0.0) || !std::isfinite(alpha1)) throw ValidationError("MLSI constant must be positive", "alpha1");
    InequalityCheck c;
    c.lhs = 4.0 * alpha1 * entropy_functional(EntropyKind::relative_entropy, ctx, rho.matrix());
    c.rhs = entropy_functional(EntropyKind::entropy_production, ctx, rho.matrix());
    c.holds = c.lhs <= c.rhs + 1e-9;
    return c;
}

namespace {

// Real coordinates of Hermitian matrices in an orthonormal (Hilbert-Schmidt) basis.
class HermitianCoordinates {
public:
    explicit HermitianCoordinates(Index d) : d_(d), basis_(d * d, d * d) {
        Index a = 0;
        const double r = 1.0 / std::sqrt(2.0);
        for (Index i = 0; i < d; ++i) basis_.col(a++) = vec(matrix_unit(d, i, i));
        for (Index i = 0; i < d; ++i)
            for (Index j = i + 1; j < d; ++j) {
                basis_.col(a++) = vec(r * (matrix_unit(d, i, j) + matrix_unit(d, j, i)));
                basis_.col(a++) = vec(cplx(0.0, r) * (matrix_unit(d, i, j) - matrix_unit(d, j, i)));
            }
    }

    Index size() const { return d_ * d_; }
    const Matrix& basis() const { return basis_; }
    // Re Tr[A B_a] for every basis element; for Hermitian A these are its coordinates.
    RealVector pair(const Matrix& a) const { return (basis_.adjoint() * vec(a)).real(); }
    Matrix matrix(const RealVector& x) const { return unvec(basis_ * x.cast<cplx>(), d_); }

private:
    Index d_;
    Matrix basis_;
};

struct LipValue {
    double norm;
    RealVector grad;
};

LipValue lip_with_gradient(const LipschitzContext& lip, const HermitianCoordinates& hc, const Matrix& x) {
    double s2 = 0.0;
    RealVector g = RealVector::Zero(hc.size());
    for (Index j = 0; j < static_cast<Index>(lip.derivations().size()); ++j) {
        const Matrix& l = lip.derivations()[static_cast<std::size_t>(j)];
        const Matrix c = commutator(l, x);
        Eigen::JacobiSVD<Matrix> svd(c, Eigen::ComputeThinU | Eigen::ComputeThinV);
        const double s = svd.singularValues()(0);
        if (s == 0.0) continue;
        const Vector u = svd.matrixU().col(0);
        const Vector v = svd.matrixV().col(0);
        // d s = Re Tr[(v u^* L - L v u^*) dX]
        const Matrix vu = v * u.adjoint();
        const Matrix a = vu * l - l * vu;
        const double w = lip.weight(j);
        s2 += w * s * s;
        g += w * s * hc.pair(a);
    }
    const double n = std::sqrt(s2);
    if (n > 0.0) g /= n;
    return {n, g};
}

}  // namespace

double w1_lower_bound(const LipschitzContext& lip, const DensityOperator& rho1, const DensityOperator& rho2,
                      const W1Options& options) {
    const Index d = lip.dim();
    check_square(rho1.matrix(), d, "rho1");
    check_square(rho2.matrix(), d, "rho2");
    if (d > options.dimension_guard) throw ValidationError("dimension exceeds the W1 search guard", "dimension_guard");
    const HermitianCoordinates hc(d);
    const RealVector delta = hc.pair(rho1.matrix() - rho2.matrix());
    if (delta.norm() <= 1e-14) return 0.0;

    // Hermitian X with zero Lipschitz seminorm: the common commutant of the derivations.
    const Matrix id = Matrix::Identity(d, d);
    Matrix gram = Matrix::Zero(d * d, d * d);
    for (const Matrix& l : lip.derivations()) {
        const Matrix c = kron(id, l) - kron(l.transpose(), id);
        gram += c.adjoint() * c;
    }
    const RealMatrix real_gram = (hc.basis().adjoint() * gram * hc.basis()).real();
    Eigen::SelfAdjointEigenSolver<RealMatrix> es(0.5 * (real_gram + real_gram.transpose()));
    const double scale = std::max(1.0, es.eigenvalues().cwiseAbs().maxCoeff());
    Index m = 0;
    while (m < es.eigenvalues().size() && es.eigenvalues()(m) <= 1e-10 * scale) ++m;
    const RealMatrix null = es.eigenvectors().leftCols(m);
    if ((null.transpose() * delta).norm() > 1e-10 * std::max(1.0, delta.norm()))
        throw ValidationError("unbounded direction: the states differ on an observable with zero Lipschitz norm",
                              "rho1-rho2");
    auto project = [&](RealVector x) -> RealVector { return x - null * (null.transpose() * x); };

    auto ratio = [&](const RealVector& x, LipValue& lv) {
        lv = lip_with_gradient(lip, hc, hc.matrix(x));
        return lv.norm > 0.0 ? delta.dot(x) / lv.norm : 0.0;
    };

    double best = 0.0;
    for (int start = 0; start <= options.random_starts; ++start) {
        RealVector x;
        if (start == 0) {
            x = delta;
        } else {
            auto rng = make_stream(options.seed, start, 0, 0, 2);
            std::normal_distribution<double> n(0.0, 1.0);
            x.resize(hc.size());
            for (Index a = 0; a < x.size(); ++a) x(a) = n(rng);
        }
        x = project(x);
        if (x.norm() == 0.0) continue;
        x.normalize();
        LipValue lv;
        double f = ratio(x, lv);
        if (f < 0.0) {
            x = -x;
            f = -f;
        }
        best = std::max(best, f);
        double step = 0.3;
        for (int it = 0; it < options.iterations && step > 1e-10 && lv.norm > 0.0; ++it) {
            RealVector g = project((delta * lv.norm - delta.dot(x) * lv.grad) / (lv.norm * lv.norm));
            const double gn = g.norm();
            if (!(gn > 0.0)) break;
            RealVector y = project(x + step * g / gn);
            y.normalize();
            LipValue ly;
            const double fy = ratio(y, ly);
            if (fy > f) {
                x = y;
                f = fy;
                lv = ly;
                best = std::max(best, f);
                step *= 1.5;
            } else {
                step *= 0.5;
            }
        }
    }
    return best;
}

LsiBracket tensorization_lsi_bounds(const std::vector<GeneratorContext>& factors) {
    if (factors.empty()) throw ValidationError("at least one factor is required", "factors");
    const Index d = factors.front().dim();
    LsiBracket b;
    b.min_gap = kInf;
    double max_inv = 0.0;
    for (std::size_t k = 0; k < factors.size(); ++k) {
        const GeneratorContext& f = factors[k];
        const std::string where = "factors[" + std::to_string(k) + "]";
        if (f.dim() != d) throw DimensionMismatch("mixed local dimensions", where);
        if (!f.primitive) throw ValidationError("factor is not primitive", where);
        if (!check_detailed_balance(InnerProductKind::KMS, f).symmetric)
            throw NotSymmetricError("factor is not KMS-symmetric", where);
        b.min_gap = std::min(b.min_gap, spectral_gap(f));
        max_inv = std::max(max_inv, 1.0 / f.sigma().s_min());
    }
    const double dd = static_cast<double>(d);
    b.lower = b.min_gap / (std::log(dd * dd * dd * dd * max_inv) + 11.0);
    b.upper = 0.5 * b.min_gap;
    return b;
}

double tensor_alpha(const std::vector<GeneratorContext>& factors, const std::vector<RealVector>& u) {
    if (factors.empty()) throw ValidationError("at least one factor is required", "factors");
    if (u.size() != factors.size()) throw DimensionMismatch("one coefficient vector per factor is required", "u");
    double worst = 0.0;
    Index jmax = 0;
    for (std::size_t k = 0; k < factors.size(); ++k) {
        const GeneratorContext& f = factors[k];
        const LipschitzContext lip(f);
        const Matrix o = tilde_observable(f, u[k]);
        jmax = std::max(jmax, f.lindbladian.num_jumps());
        for (Index j = 0; j < f.lindbladian.num_jumps(); ++j) {
            const double n = operator_norm(commutator(f.lindbladian.jump(j), o));
            worst = std::max(worst, std::exp(0.5 * lip.bohr()[static_cast<std::size_t>(j)]) * n * n);
        }
    }
    return 2.0 * static_cast<double>(jmax) * worst;
}

}  // namespace qdev
