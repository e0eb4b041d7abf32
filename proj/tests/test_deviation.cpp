#include <gtest/gtest.h>

#include <cmath>

#include "qdev/deviation.hpp"
#include "qdev/models.hpp"
#include "test_util.hpp"

using namespace qdev;
using namespace qdev::testing;

namespace {

RealVector vec1(double x) { return (RealVector(1) << x).finished(); }

MeasurementSetup scalar_setup(cplx c, bool brownian) {
    Matrix one = Matrix::Identity(1, 1);
    Lindbladian l(Matrix::Zero(1, 1), {c * one});
    return MeasurementSetup(stationary_state(l), {vec1(1.0)}, brownian ? 1 : 0);
}

MeasurementSetup depolarizing_setup(const Matrix& sigma, std::vector<RealVector> dirs, Index q) {
    return MeasurementSetup(stationary_state(models::depolarizing(FaithfulState(sigma))), std::move(dirs), q);
}

RealVector unit(Index k, Index i) {
    RealVector u = RealVector::Zero(k);
    u(i) = 1.0;
    return u;
}

double poisson_exponent(double mu, double r) { return (mu + r) * std::log((mu + r) / mu) - r; }

// Independent route: KMS-symmetrize L_lambda with the dual map and take the top of its (real) spectrum.
double scgf_oracle(const MeasurementSetup& setup, const RealVector& lambda) {
    SuperOperator l = perturbed_generator(setup, lambda);
    SuperOperator dual = dual_superoperator(InnerProductKind::KMS, setup.sigma(), l);
    Matrix sym = 0.5 * (l.matrix() + dual.matrix());
    Eigen::ComplexEigenSolver<Matrix> es(sym);
    double top = -1e300;
    for (Index i = 0; i < es.eigenvalues().size(); ++i) top = std::max(top, es.eigenvalues()(i).real());
    return top;
}

}  // namespace

TEST(Setup, Validation) {
    GeneratorContext ctx = stationary_state(models::depolarizing(FaithfulState(DensityOperator::maximally_mixed(2))));
    EXPECT_THROW(MeasurementSetup(ctx, {}, 0), ValidationError);
    RealVector bad = RealVector::Zero(4);
    bad(0) = 0.9;
    EXPECT_THROW(MeasurementSetup(ctx, {bad}, 1), ValidationError);
    EXPECT_THROW(MeasurementSetup(ctx, {unit(4, 0), unit(4, 0)}, 1), ValidationError);
    EXPECT_THROW(MeasurementSetup(ctx, {unit(3, 0)}, 1), DimensionMismatch);
    EXPECT_THROW(MeasurementSetup(ctx, {unit(4, 0)}, 2), ValidationError);
    GeneratorContext ad = stationary_state(Lindbladian(Matrix::Zero(2, 2), {matrix_unit(2, 0, 1)}));
    EXPECT_THROW(MeasurementSetup(ad, {unit(1, 0)}, 1), NotFaithfulError);
}

TEST(Mean, ScalarAndDepolarizingExamples) {
    const cplx c(0.7, -0.4);
    EXPECT_NEAR(mean_vector(scalar_setup(c, true))(0), 2 * c.real(), 1e-14);
    EXPECT_NEAR(mean_vector(scalar_setup(c, false))(0), std::norm(c), 1e-14);
    MeasurementSetup s = depolarizing_setup(Matrix::Identity(3, 3) / 3.0, {unit(9, 1)}, 1);
    const Matrix& l1 = s.context().lindbladian.jump(1);
    ASSERT_GT(max_norm(l1), 0.1);
    EXPECT_NEAR(l1.trace().real(), 0.0, 1e-15);
    EXPECT_NEAR(mean_vector(s)(0), 0.0, 1e-14);
}

TEST(FStatistics, IdentityGivesMeanAndScalarExample) {
    std::mt19937_64 rng(51);
    for (int trial = 0; trial < 10; ++trial) {
        Matrix sigma = random_density(rng, 3);
        RealVector u1 = RealVector::Zero(9), u2 = RealVector::Zero(9);
        u1(1) = u1(3) = std::sqrt(0.5);
        u2(1) = std::sqrt(0.5);
        u2(3) = -std::sqrt(0.5);
        MeasurementSetup s = depolarizing_setup(sigma, {u1, u2, unit(9, 5)}, 1);
        RealVector f = f_statistics(s, Matrix::Identity(3, 3));
        RealVector m = mean_vector(s);
        EXPECT_LT((f - m).cwiseAbs().maxCoeff(), 1e-12);
        // Poisson statistics are nonnegative on positive X (the domain of the variational problem).
        Matrix x = random_rank_density(rng, 3, 1 + trial % 3);
        RealVector fx = f_statistics(s, x);
        EXPECT_GE(fx(1), -1e-12);
        EXPECT_GE(fx(2), -1e-12);
        EXPECT_LT(f_statistics(s, Matrix::Zero(3, 3)).cwiseAbs().maxCoeff(), 1e-15);
    }
    EXPECT_NEAR(f_statistics(scalar_setup(cplx(0.3, 0.2), true), Matrix::Identity(1, 1))(0), 0.6, 1e-15);
}

TEST(Perturbed, ZeroTiltAndScalarForms) {
    std::mt19937_64 rng(52);
    MeasurementSetup s = depolarizing_setup(random_density(rng, 2), {unit(4, 1), unit(4, 2)}, 1);
    SuperOperator l0 = perturbed_generator(s, RealVector::Zero(2));
    EXPECT_LE(max_norm(l0.matrix() - s.context().heisenberg.matrix()), 1e-14);

    const cplx c(0.4, 0.9);
    for (double lam : {-1.3, 0.0, 0.7, 2.5}) {
        EXPECT_NEAR(perturbed_generator(scalar_setup(c, true), vec1(lam)).matrix()(0, 0).real(),
                    lam * 2 * c.real() + lam * lam / 2, 1e-13);
        EXPECT_NEAR(perturbed_generator(scalar_setup(c, false), vec1(lam)).matrix()(0, 0).real(),
                    std::expm1(lam) * std::norm(c), 1e-13);
        EXPECT_NEAR(scgf(scalar_setup(c, true), vec1(lam)), lam * 2 * c.real() + lam * lam / 2, 1e-13);
        EXPECT_NEAR(scgf(scalar_setup(c, false), vec1(lam)), std::expm1(lam) * std::norm(c), 1e-13);
    }
}

TEST(Scgf, MatchesSymmetrizedSpectrumAndVanishesAtZero) {
    std::mt19937_64 rng(53);
    std::uniform_real_distribution<double> uni(-2.0, 2.0);
    for (int trial = 0; trial < 10; ++trial) {
        const Index d = 2 + trial % 2;
        Matrix sigma = random_density(rng, d);
        MeasurementSetup s = depolarizing_setup(sigma, {unit(d * d, 1), unit(d * d, 2)}, 1);
        EXPECT_NEAR(scgf(s, RealVector::Zero(2)), 0.0, 1e-10);
        RealVector lam(2);
        lam << uni(rng), uni(rng);
        EXPECT_NEAR(scgf(s, lam), scgf_oracle(s, lam), 1e-9);
    }
}

TEST(Scgf, ConvexOnRandomSegments) {
    std::mt19937_64 rng(54);
    std::uniform_real_distribution<double> uni(-3.0, 3.0);
    MeasurementSetup s = depolarizing_setup(random_density(rng, 3), {unit(9, 1), unit(9, 4), unit(9, 7)}, 2);
    for (int trial = 0; trial < 100; ++trial) {
        RealVector a(3), b(3);
        for (int i = 0; i < 3; ++i) a(i) = uni(rng), b(i) = uni(rng);
        EXPECT_LE(scgf(s, 0.5 * (a + b)), 0.5 * (scgf(s, a) + scgf(s, b)) + 1e-9);
    }
}

TEST(Scgf, HellmannFeynmanGradient) {
    std::mt19937_64 rng(55);
    MeasurementSetup s = depolarizing_setup(random_density(rng, 3), {unit(9, 1), unit(9, 4)}, 1);
    ScgfEvaluator eval(s);
    RealVector lam(2);
    lam << 0.4, -0.3;
    ScgfValue v = eval(lam);
    for (Index j = 0; j < 2; ++j) {
        RealVector p = lam, m = lam;
        p(j) += 1e-5;
        m(j) -= 1e-5;
        EXPECT_NEAR(v.gradient(j), (eval.value(p) - eval.value(m)) / 2e-5, 1e-7);
    }
    EXPECT_NEAR(inner_product(InnerProductKind::KMS, s.sigma(), v.top, v.top).real(), 1.0, 1e-12);
}

TEST(MainBound, GaussianAndPoissonClosedForms) {
    MeasurementSetup g = scalar_setup(0.0, true);
    DensityOperator one(Matrix::Identity(1, 1));
    BoundReport rep = main_bound(g, one, vec1(1.0));
    EXPECT_NEAR(rep.exponent, 0.5, 1e-10);
    EXPECT_NEAR(rep.prefactor, 1.0, 1e-14);
    EXPECT_NEAR(rep.lambda_star(0), 1.0, 1e-8);

    for (double mu : {0.5, 1.0, 2.0})
        for (double r : {0.2, 1.0, 3.0}) {
            BoundReport p = main_bound(scalar_setup(std::sqrt(mu), false), one, vec1(r));
            EXPECT_NEAR(p.exponent, poisson_exponent(mu, r), 1e-8) << mu << " " << r;
        }
    EXPECT_NEAR(main_bound(scalar_setup(1.0, false), one, vec1(1.0)).exponent, 2 * std::log(2.0) - 1, 1e-8);
}

TEST(MainBound, ZeroThresholdMonotoneAndPrefactor) {
    std::mt19937_64 rng(56);
    Matrix sigma = random_density(rng, 3);
    MeasurementSetup s = depolarizing_setup(sigma, {unit(9, 1), unit(9, 5)}, 1);
    DensityOperator sig(sigma);
    BoundReport zero = main_bound(s, sig, RealVector::Zero(2));
    EXPECT_NEAR(zero.exponent, 0.0, 1e-10);
    EXPECT_NEAR(zero.prefactor, 1.0, 1e-12);
    EXPECT_NEAR(zero.bound(3.0), 1.0, 1e-9);

    double prev = -1.0;
    for (double r : {0.0, 0.05, 0.1, 0.3, 0.6, 1.0, 2.0}) {
        RealVector rv(2);
        rv << r, 0.5 * r;
        BoundReport rep = main_bound(s, sig, rv);
        EXPECT_GE(rep.exponent, prev - 1e-10);
        EXPECT_GE(rep.exponent, -1e-10);
        EXPECT_LT(rep.stationarity_residual, 1e-6);
        prev = rep.exponent;
        EXPECT_GE(rep.bound(1.0), rep.bound(2.0));
    }
    DensityOperator rho(random_density(rng, 3));
    EXPECT_GE(main_bound(s, rho, RealVector::Zero(2)).prefactor, 1.0 - 1e-12);

    RealVector neg(2);
    neg << 0.1, -0.2;
    try {
        main_bound(s, sig, neg);
        FAIL();
    } catch (const ValidationError& e) {
        EXPECT_EQ(e.context(), "r[1]");
    }
}

TEST(MainBound, PoissonZeroJumpIsInfinite) {
    DensityOperator one(Matrix::Identity(1, 1));
    BoundReport rep = main_bound(scalar_setup(0.0, false), one, vec1(0.5));
    EXPECT_TRUE(std::isinf(rep.exponent));
    EXPECT_EQ(rep.bound(1.0), 0.0);
}

TEST(MassRelativeEntropy, Examples) {
    EXPECT_EQ(mass_relative_entropy(vec1(0.7), vec1(0.7)), 0.0);
    EXPECT_NEAR(mass_relative_entropy(vec1(2.0), vec1(1.0)), 2 * std::log(2.0) - 1, 1e-15);
    EXPECT_TRUE(std::isinf(mass_relative_entropy(vec1(1.0), vec1(0.0))));
    EXPECT_NEAR(mass_relative_entropy(vec1(0.0), vec1(0.4)), 0.4, 1e-15);
    EXPECT_THROW(mass_relative_entropy(vec1(-1.0), vec1(1.0)), ValidationError);
    std::mt19937_64 rng(57);
    std::uniform_real_distribution<double> uni(0.01, 3.0);
    for (int i = 0; i < 100; ++i) {
        RealVector p(3), q(3);
        for (int j = 0; j < 3; ++j) p(j) = uni(rng), q(j) = uni(rng);
        EXPECT_GE(mass_relative_entropy(p, q), 0.0);
    }
}

TEST(RateFunction, ScalarLegendrePairs) {
    const cplx c(0.6, 0.1);
    std::vector<RealVector> grid;
    for (double s = -1.0; s <= 3.0; s += 0.25) grid.push_back(vec1(s));
    RateTable b = rate_function(scalar_setup(c, true), grid);
    for (const RatePoint& p : b.points) EXPECT_NEAR(p.value, 0.5 * std::pow(p.s(0) - 2 * c.real(), 2), 1e-8);
    EXPECT_TRUE(b.convex);

    const double mu = std::norm(c);
    std::vector<RealVector> pgrid;
    for (double s = 0.1; s <= 3.0; s += 0.3) pgrid.push_back(vec1(s));
    RateTable p = rate_function(scalar_setup(c, false), pgrid, 2);
    for (const RatePoint& pt : p.points)
        EXPECT_NEAR(pt.value, pt.s(0) * std::log(pt.s(0) / mu) - pt.s(0) + mu, 1e-8);
    EXPECT_TRUE(p.convex);

    RateTable neg = rate_function(scalar_setup(c, false), {vec1(-0.5)});
    EXPECT_TRUE(neg.points[0].unbounded);
    EXPECT_TRUE(std::isinf(neg.points[0].value));
}

TEST(RateFunction, ZeroAtMeanAndRefusesNonSymmetric) {
    std::mt19937_64 rng(58);
    MeasurementSetup s = depolarizing_setup(random_density(rng, 3), {unit(9, 1), unit(9, 5)}, 1);
    RateTable t = rate_function(s, {mean_vector(s)});
    EXPECT_NEAR(t.points[0].value, 0.0, 1e-8);

    std::vector<Matrix> jumps = {0.5 * random_matrix(rng, 2), 0.5 * random_matrix(rng, 2)};
    MeasurementSetup ns(stationary_state(Lindbladian(random_hermitian(rng, 2), jumps)), {unit(2, 0)}, 1);
    EXPECT_THROW(rate_function(ns, {vec1(0.0)}), NotSymmetricError);
}

TEST(RateFunction, LegendreDualityWithMainBound) {
    std::mt19937_64 rng(59);
    for (Index d : {2, 3}) {
        MeasurementSetup s = depolarizing_setup(random_density(rng, d), {unit(d * d, 1)}, 1);
        const RealVector m = mean_vector(s);
        DensityOperator sig(s.sigma().matrix());
        for (double r : {0.1, 0.3, 1.0}) {
            const double exponent = main_bound(s, sig, vec1(r)).exponent;
            RateTable t = rate_function(s, {m + vec1(r)});
            EXPECT_NEAR(t.points[0].value, exponent, 1e-6);
            EXPECT_NEAR(direct_variational_crosscheck(s, vec1(r)), exponent, 1e-5) << d << " " << r;
        }
    }
}

TEST(Crosscheck, ScalarZeroAndGuard) {
    EXPECT_NEAR(direct_variational_crosscheck(scalar_setup(0.0, true), vec1(1.0)), 0.5, 1e-12);
    EXPECT_NEAR(direct_variational_crosscheck(scalar_setup(1.0, false), vec1(1.0)), 2 * std::log(2.0) - 1, 1e-12);
    MeasurementSetup q = depolarizing_setup(Matrix::Identity(2, 2) / 2.0, {unit(4, 1)}, 1);
    EXPECT_NEAR(direct_variational_crosscheck(q, vec1(0.0)), 0.0, 1e-10);
    MeasurementSetup big = depolarizing_setup(Matrix::Identity(4, 4) / 4.0, {unit(16, 1)}, 1);
    EXPECT_THROW(direct_variational_crosscheck(big, vec1(0.1)), ValidationError);
}

TEST(Crosscheck, MixedChannelsAgreeWithBound) {
    std::mt19937_64 rng(60);
    MeasurementSetup s = depolarizing_setup(random_density(rng, 2), {unit(4, 1), unit(4, 2)}, 1);
    RealVector r(2);
    r << 0.3, 0.2;
    DensityOperator sig(s.sigma().matrix());
    EXPECT_NEAR(direct_variational_crosscheck(s, r), main_bound(s, sig, r).exponent, 1e-5);
}
