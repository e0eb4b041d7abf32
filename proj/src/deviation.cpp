#include "qdev/deviation.hpp"

#include <gsl/gsl_errno.h>
#include <gsl/gsl_multimin.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <thread>

namespace qdev {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

std::string index_context(const char* what, Index i) { return std::string(what) + "[" + std::to_string(i) + "]"; }

}  // namespace

MeasurementSetup::MeasurementSetup(GeneratorContext ctx, std::vector<RealVector> directions, Index q)
    : ctx_(std::move(ctx)), directions_(std::move(directions)), q_(q) {
    ctx_.sigma();  // throws NotFaithfulError
    const Index k = ctx_.lindbladian.num_jumps();
    const Index l = num_channels();
    if (l < 1 || l > k)
        throw ValidationError("number of directions must lie in [1, number of jumps]", "directions");
    if (q_ < 0 || q_ > l) throw ValidationError("q must lie in [0, number of directions]", "q");
    for (Index i = 0; i < l; ++i) {
        const RealVector& u = directions_[static_cast<std::size_t>(i)];
        if (u.size() != k) throw DimensionMismatch("direction length must equal the number of jumps", index_context("directions", i));
        if (!u.allFinite() || std::abs(u.norm() - 1.0) > 1e-12)
            throw ValidationError("direction is not a unit vector", index_context("directions", i));
        for (Index j = 0; j < i; ++j)
            if (std::abs(u.dot(directions_[static_cast<std::size_t>(j)])) > 1e-12)
                throw ValidationError("directions are not orthogonal", index_context("directions", i));
    }
    const Index d = ctx_.dim();
    for (const RealVector& u : directions_) {
        Matrix lu = Matrix::Zero(d, d);
        for (Index j = 0; j < k; ++j) lu += u(j) * ctx_.lindbladian.jump(j);
        tilted_.push_back(lu);
    }
}

RealVector mean_vector(const MeasurementSetup& setup) {
    const Matrix& s = setup.sigma().matrix();
    RealVector m(setup.num_channels());
    for (Index j = 0; j < setup.num_channels(); ++j) {
        const Matrix& lu = setup.tilted_jump(j);
        m(j) = setup.is_brownian(j) ? (s * (lu + lu.adjoint())).trace().real() : (s * lu.adjoint() * lu).trace().real();
    }
    return m;
}

RealVector f_statistics(const MeasurementSetup& setup, const Matrix& x) {
    if (x.rows() != setup.dim() || x.cols() != setup.dim()) throw DimensionMismatch("observable dimension mismatch", "X");
    RealVector f(setup.num_channels());
    for (Index j = 0; j < setup.num_channels(); ++j) {
        const Matrix& lu = setup.tilted_jump(j);
        Matrix image = setup.is_brownian(j) ? Matrix(lu.adjoint() * x + x * lu) : Matrix(lu.adjoint() * x * lu);
        f(j) = inner_product(InnerProductKind::KMS, setup.sigma(), x, image).real();
    }
    return f;
}

namespace {

SuperOperator channel_piece(const MeasurementSetup& setup, Index j) {
    const Index d = setup.dim();
    const Matrix& lu = setup.tilted_jump(j);
    const Matrix id = Matrix::Identity(d, d);
    if (setup.is_brownian(j)) return SuperOperator::sandwich(lu.adjoint(), id) + SuperOperator::sandwich(id, lu);
    return SuperOperator::sandwich(lu.adjoint(), lu);
}

void check_lambda(const MeasurementSetup& setup, const RealVector& lambda) {
    if (lambda.size() != setup.num_channels()) throw DimensionMismatch("tilt length must equal the number of channels", "lambda");
    if (!lambda.allFinite()) throw ValidationError("tilt entries must be finite", "lambda");
}

}  // namespace

SuperOperator perturbed_generator(const MeasurementSetup& setup, const RealVector& lambda) {
    check_lambda(setup, lambda);
    Matrix m = setup.context().heisenberg.matrix();
    const Index n = m.rows();
    for (Index j = 0; j < setup.num_channels(); ++j) {
        const double lj = lambda(j);
        if (setup.is_brownian(j)) {
            if (lj == 0.0) continue;
            m += lj * channel_piece(setup, j).matrix();
            m += (0.5 * lj * lj) * Matrix::Identity(n, n);
        } else {
            const double w = std::expm1(lj);
            if (w != 0.0) m += w * channel_piece(setup, j).matrix();
        }
    }
    return SuperOperator(setup.dim(), m);
}

ScgfEvaluator::ScgfEvaluator(const MeasurementSetup& setup) : setup_(&setup) {
    const FaithfulState& sigma = setup.sigma();
    const Matrix gh = gamma_superoperator(0.5, sigma).matrix();
    gamma_inv_half_ = gamma_superoperator(-0.5, sigma).matrix();
    auto conj = [&](const Matrix& a) { return hermitian_part(Matrix(gh * a * gamma_inv_half_)); };
    base_ = conj(setup.context().heisenberg.matrix());
    for (Index j = 0; j < setup.num_channels(); ++j) pieces_.push_back(conj(channel_piece(setup, j).matrix()));
}

Matrix ScgfEvaluator::assemble(const RealVector& lambda) const {
    check_lambda(*setup_, lambda);
    Matrix m = base_;
    for (Index j = 0; j < setup_->num_channels(); ++j) {
        const double lj = lambda(j);
        if (setup_->is_brownian(j)) {
            m += lj * pieces_[static_cast<std::size_t>(j)];
            m.diagonal().array() += 0.5 * lj * lj;
        } else {
            m += std::expm1(lj) * pieces_[static_cast<std::size_t>(j)];
        }
    }
    return m;
}

ScgfValue ScgfEvaluator::operator()(const RealVector& lambda) const {
    Eigen::SelfAdjointEigenSolver<Matrix> es(assemble(lambda));
    if (es.info() != Eigen::Success) throw NumericalError("eigensolver failed for the tilted generator");
    const Index n = es.eigenvalues().size();
    ScgfValue out;
    out.value = es.eigenvalues()(n - 1);
    out.gap = n > 1 ? out.value - es.eigenvalues()(n - 2) : kInf;
    const Vector v = es.eigenvectors().col(n - 1);
    out.gradient.resize(setup_->num_channels());
    for (Index j = 0; j < setup_->num_channels(); ++j) {
        const double expect = v.dot(pieces_[static_cast<std::size_t>(j)] * v).real();
        out.gradient(j) = setup_->is_brownian(j) ? expect + lambda(j) : std::exp(lambda(j)) * expect;
    }
    out.top = unvec(gamma_inv_half_ * v, setup_->dim());
    return out;
}

double ScgfEvaluator::value(const RealVector& lambda) const {
    Eigen::SelfAdjointEigenSolver<Matrix> es(assemble(lambda), Eigen::EigenvaluesOnly);
    if (es.info() != Eigen::Success) throw NumericalError("eigensolver failed for the tilted generator");
    return es.eigenvalues()(es.eigenvalues().size() - 1);
}

double scgf(const MeasurementSetup& setup, const RealVector& lambda) { return ScgfEvaluator(setup).value(lambda); }

namespace {

struct LegendreResult {
    double value = 0.0;
    RealVector lambda;
    double residual = 0.0;
    int sweeps = 0;
    bool converged = false;
    bool unbounded = false;
};

// sup over a box of lambda.s - e(lambda) by coordinate ascent. Each coordinate
// is solved by bisection on the Hellmann-Feynman derivative, or by golden
// section when the top eigenvalue is nearly degenerate.
class LegendreSolver {
public:
    LegendreSolver(const MeasurementSetup& setup, const ScgfEvaluator& eval, const OptimizerOptions& opt,
                   bool nonnegative)
        : setup_(setup), eval_(eval), opt_(opt), nonnegative_(nonnegative) {}

    LegendreResult solve(const RealVector& s) const {
        const Index l = setup_.num_channels();
        LegendreResult res;
        res.lambda = RealVector::Zero(l);
        double obj = -eval_.value(res.lambda);
        for (int sweep = 1; sweep <= opt_.max_sweeps; ++sweep) {
            res.sweeps = sweep;
            for (Index j = 0; j < l; ++j) {
                if (!coordinate(res.lambda, s, j)) {
                    res.unbounded = true;
                    res.value = kInf;
                    return res;
                }
            }
            const double next = res.lambda.dot(s) - eval_.value(res.lambda);
            const double change = std::abs(next - obj);
            obj = std::max(obj, next);
            if (l == 1 || change < opt_.tolerance * std::max(1.0, std::abs(obj))) {
                res.converged = true;
                break;
            }
        }
        res.value = res.lambda.dot(s) - eval_.value(res.lambda);
        ScgfValue at = eval_(res.lambda);
        for (Index j = 0; j < l; ++j) {
            double g = s(j) - at.gradient(j);
            if (res.lambda(j) <= lower_limit(j) && g < 0) g = 0;
            res.residual = std::max(res.residual, std::abs(g));
        }
        return res;
    }

private:
    double upper_cap(Index j) const { return setup_.is_brownian(j) ? opt_.brownian_cap : opt_.poisson_cap; }
    double lower_limit(Index j) const { return nonnegative_ ? 0.0 : -upper_cap(j); }

    struct Probe {
        double deriv;
        double gap;
    };

    Probe probe(RealVector& lambda, const RealVector& s, Index j, double x) const {
        lambda(j) = x;
        ScgfValue v = eval_(lambda);
        return {s(j) - v.gradient(j), v.gap};
    }

    double objective(RealVector& lambda, const RealVector& s, Index j, double x) const {
        lambda(j) = x;
        return x * s(j) - eval_.value(lambda);
    }

    // Returns false when the supremum diverges along coordinate j.
    bool coordinate(RealVector& lambda, const RealVector& s, Index j) const {
        const double lo_lim = lower_limit(j), hi_lim = upper_cap(j);
        double a = nonnegative_ ? 0.0 : std::max(lo_lim, -opt_.lambda_max);
        double b = std::min(hi_lim, opt_.lambda_max);
        a = std::min(a, lambda(j));
        b = std::max(b, lambda(j));
        bool degenerate = false;

        Probe pa = probe(lambda, s, j, a);
        degenerate |= pa.gap < 1e-8;
        while (pa.deriv < 0) {
            if (a <= lo_lim) {
                if (nonnegative_) {
                    lambda(j) = a;
                    return true;
                }
                return false;
            }
            b = a;
            a = std::max(lo_lim, a - 2.0 * std::max(1.0, std::abs(a)));
            pa = probe(lambda, s, j, a);
            degenerate |= pa.gap < 1e-8;
        }
        Probe pb = probe(lambda, s, j, b);
        degenerate |= pb.gap < 1e-8;
        while (pb.deriv > 0) {
            if (b >= hi_lim) return false;
            a = b;
            b = std::min(hi_lim, 2.0 * std::max(1.0, b));
            pb = probe(lambda, s, j, b);
            degenerate |= pb.gap < 1e-8;
        }

        for (int it = 0; it < 200 && !degenerate; ++it) {
            const double mid = 0.5 * (a + b);
            if (mid <= a || mid >= b) break;
            Probe pm = probe(lambda, s, j, mid);
            if (pm.gap < 1e-8) {
                degenerate = true;
                break;
            }
            if (pm.deriv > 0) a = mid;
            else b = mid;
        }
        if (!degenerate) {
            lambda(j) = 0.5 * (a + b);
            return true;
        }

        const double phi = 0.5 * (std::sqrt(5.0) - 1.0);
        double x1 = b - phi * (b - a), x2 = a + phi * (b - a);
        double f1 = objective(lambda, s, j, x1), f2 = objective(lambda, s, j, x2);
        for (int it = 0; it < 300 && b - a > 1e-13 * std::max(1.0, std::abs(a)); ++it) {
            if (f1 < f2) {
                a = x1;
                x1 = x2;
                f1 = f2;
                x2 = a + phi * (b - a);
                f2 = objective(lambda, s, j, x2);
            } else {
                b = x2;
                x2 = x1;
                f2 = f1;
                x1 = b - phi * (b - a);
                f1 = objective(lambda, s, j, x1);
            }
        }
        lambda(j) = 0.5 * (a + b);
        return true;
    }

    const MeasurementSetup& setup_;
    const ScgfEvaluator& eval_;
    OptimizerOptions opt_;
    bool nonnegative_;
};

}  // namespace

double BoundReport::bound(double t) const {
    if (t < 0) throw ValidationError("time must be nonnegative", "t");
    if (t == 0.0) return prefactor;
    if (std::isinf(exponent)) return 0.0;
    return prefactor * std::exp(-t * exponent);
}

double bound_prefactor(const FaithfulState& sigma, const DensityOperator& rho) {
    if (rho.dim() != sigma.dim()) throw DimensionMismatch("initial state dimension differs from the model", "rho");
    const Matrix si = sigma.power(-0.5);
    const Matrix& r = rho.matrix();
    return std::sqrt(std::max(0.0, (r * si * r * si).trace().real()));
}

BoundReport main_bound(const MeasurementSetup& setup, const DensityOperator& rho, const RealVector& r,
                       const OptimizerOptions& options) {
    if (r.size() != setup.num_channels()) throw DimensionMismatch("r must have one entry per channel", "r");
    for (Index j = 0; j < r.size(); ++j)
        if (!std::isfinite(r(j)) || r(j) < 0)
            throw ValidationError("deviation threshold must be finite and nonnegative", index_context("r", j));
    if (!setup.context().primitive) throw ValidationError("generator is not primitive", "model");

    BoundReport rep;
    rep.r = r;
    rep.mean = mean_vector(setup);
    rep.prefactor = bound_prefactor(setup.sigma(), rho);
    ScgfEvaluator eval(setup);
    LegendreSolver solver(setup, eval, options, true);
    LegendreResult res = solver.solve(rep.mean + r);
    rep.lambda_star = res.lambda;
    // lambda = 0 is feasible with e(0) = 0 exactly; round-off must not push the exponent below it
    rep.exponent = res.value;
    if (!(res.value > 0.0)) {
        rep.exponent = 0.0;
        rep.lambda_star.setZero();
    }
    rep.stationarity_residual = res.residual;
    rep.sweeps = res.sweeps;
    rep.converged = res.converged || res.unbounded;
    return rep;
}

double mass_relative_entropy(const RealVector& p, const RealVector& q) {
    if (p.size() != q.size()) throw DimensionMismatch("p and q must have equal length");
    double out = 0.0;
    for (Index i = 0; i < p.size(); ++i) {
        if (p(i) < 0 || q(i) < 0) throw ValidationError("entries must be nonnegative", index_context("p/q", i));
        if (p(i) == 0.0) {
            out += q(i);
        } else if (q(i) == 0.0) {
            return kInf;
        } else {
            out += p(i) * std::log(p(i) / q(i)) - p(i) + q(i);
        }
    }
    return out;
}

RateTable rate_function(const MeasurementSetup& setup, const std::vector<RealVector>& grid, int threads,
                        const OptimizerOptions& options) {
    auto db = check_detailed_balance(InnerProductKind::KMS, setup.context());
    if (!db.symmetric)
        throw NotSymmetricError("rate function requires a KMS-symmetric generator",
                                "deviation=" + std::to_string(db.deviation));
    for (std::size_t i = 0; i < grid.size(); ++i)
        if (grid[i].size() != setup.num_channels() || !grid[i].allFinite())
            throw ValidationError("grid point must have one finite entry per channel", index_context("grid", static_cast<Index>(i)));

    ScgfEvaluator eval(setup);
    LegendreSolver solver(setup, eval, options, false);
    RateTable table;
    table.points.resize(grid.size());
    auto work = [&](std::size_t i) {
        LegendreResult res = solver.solve(grid[i]);
        RatePoint& p = table.points[i];
        p.s = grid[i];
        p.value = res.value;
        p.lambda = res.lambda;
        p.unbounded = res.unbounded;
    };
    const std::size_t nt = static_cast<std::size_t>(std::max(1, threads));
    if (nt == 1 || grid.size() < 2) {
        for (std::size_t i = 0; i < grid.size(); ++i) work(i);
    } else {
        std::vector<std::thread> pool;
        for (std::size_t t = 0; t < nt; ++t)
            pool.emplace_back([&, t] {
                for (std::size_t i = t; i < grid.size(); i += nt) work(i);
            });
        for (auto& th : pool) th.join();
    }

    for (std::size_t i = 1; i + 1 < table.points.size(); ++i) {
        const RatePoint &a = table.points[i - 1], &b = table.points[i], &c = table.points[i + 1];
        if (a.unbounded || b.unbounded || c.unbounded) continue;
        // only collinear, equally spaced triples admit the midpoint test
        if (((a.s + c.s) / 2.0 - b.s).norm() > 1e-12 * std::max(1.0, b.s.norm())) continue;
        if (b.value > 0.5 * (a.value + c.value) + 1e-9) table.convex = false;
    }
    return table;
}

namespace {

struct CrossProblem {
    const MeasurementSetup* setup;
    RealVector s;
    Matrix gamma_inv_half;  // X = sigma^{-1/4} B sigma^{-1/4}
    Index d;
};

Matrix params_to_x(const CrossProblem& p, const double* v) {
    Matrix a(p.d, p.d);
    for (Index i = 0; i < p.d * p.d; ++i) a(i % p.d, i / p.d) = cplx(v[2 * i], v[2 * i + 1]);
    Matrix b = a.adjoint() * a;
    const double n = b.norm();
    if (!(n > 0)) return Matrix();
    b /= n;
    return hermitian_part(unvec(p.gamma_inv_half * vec(b), p.d));
}

double one_sided_entropy(double s, double f) {
    if (s <= f) return 0.0;
    if (f <= 0.0) return kInf;
    return s * std::log(s / f) - s + f;
}

double cross_objective(const CrossProblem& p, const double* v) {
    Matrix x = params_to_x(p, v);
    if (x.size() == 0) return kInf;
    const MeasurementSetup& setup = *p.setup;
    RealVector f = f_statistics(setup, x);
    double val = dirichlet_form(setup.context(), x);
    for (Index j = 0; j < setup.num_channels(); ++j) {
        if (setup.is_brownian(j)) {
            const double gap = std::max(0.0, p.s(j) - f(j));
            val += 0.5 * gap * gap;
        } else {
            val += one_sided_entropy(p.s(j), std::max(0.0, f(j)));
        }
    }
    return val;
}

double gsl_f(const gsl_vector* v, void* params) {
    const double r = cross_objective(*static_cast<CrossProblem*>(params), v->data);
    return std::isfinite(r) ? r : 1e300;
}

void gsl_df(const gsl_vector* v, void* params, gsl_vector* g) {
    const std::size_t n = v->size;
    std::vector<double> x(v->data, v->data + n);
    auto* p = static_cast<CrossProblem*>(params);
    for (std::size_t i = 0; i < n; ++i) {
        const double h = 1e-6 * std::max(1.0, std::abs(x[i]));
        const double keep = x[i];
        x[i] = keep + h;
        const double fp = cross_objective(*p, x.data());
        x[i] = keep - h;
        const double fm = cross_objective(*p, x.data());
        x[i] = keep;
        gsl_vector_set(g, i, std::isfinite(fp) && std::isfinite(fm) ? (fp - fm) / (2 * h) : 0.0);
    }
}

void gsl_fdf(const gsl_vector* v, void* params, double* f, gsl_vector* g) {
    *f = gsl_f(v, params);
    gsl_df(v, params, g);
}

}  // namespace

double direct_variational_crosscheck(const MeasurementSetup& setup, const RealVector& r,
                                     const CrosscheckOptions& options) {
    if (setup.dim() > options.dimension_guard)
        throw ValidationError("cross-check limited to dimension " + std::to_string(options.dimension_guard), "dim");
    if (r.size() != setup.num_channels()) throw DimensionMismatch("r must have one entry per channel", "r");
    for (Index j = 0; j < r.size(); ++j)
        if (!(r(j) >= 0)) throw ValidationError("deviation threshold must be nonnegative", index_context("r", j));

    gsl_set_error_handler_off();
    CrossProblem prob{&setup, mean_vector(setup) + r, gamma_superoperator(-0.5, setup.sigma()).matrix(), setup.dim()};
    const std::size_t n = static_cast<std::size_t>(2 * prob.d * prob.d);

    gsl_multimin_function_fdf fn;
    fn.n = n;
    fn.f = gsl_f;
    fn.df = gsl_df;
    fn.fdf = gsl_fdf;
    fn.params = &prob;

    std::mt19937_64 rng(options.seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    double best = kInf;
    gsl_vector* x = gsl_vector_alloc(n);
    gsl_multimin_fdfminimizer* m = gsl_multimin_fdfminimizer_alloc(gsl_multimin_fdfminimizer_vector_bfgs2, n);
    const Matrix start0 = setup.sigma().power(0.25);  // gives X = identity
    for (int start = 0; start < std::max(1, options.starts); ++start) {
        for (std::size_t i = 0; i < n; ++i) {
            if (start == 0) {
                const Index k = static_cast<Index>(i / 2);
                const cplx z = start0(k % prob.d, k / prob.d);
                gsl_vector_set(x, i, i % 2 == 0 ? z.real() : z.imag());
            } else {
                gsl_vector_set(x, i, normal(rng));
            }
        }
        best = std::min(best, cross_objective(prob, x->data));
        gsl_multimin_fdfminimizer_set(m, &fn, x, 0.05, 0.1);
        for (int it = 0; it < 5000; ++it) {
            if (gsl_multimin_fdfminimizer_iterate(m) != GSL_SUCCESS) break;
            if (gsl_multimin_test_gradient(m->gradient, 1e-10) == GSL_SUCCESS) break;
        }
        best = std::min(best, cross_objective(prob, m->x->data));
    }
    gsl_multimin_fdfminimizer_free(m);
    gsl_vector_free(x);
    return best;
}

}  // namespace qdev
