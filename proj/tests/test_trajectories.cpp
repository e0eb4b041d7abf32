#include <gtest/gtest.h>

#include <chrono>
#include <cmath>
#include <limits>

#include "qdev/models.hpp"
#include "qdev/trajectories.hpp"
#include "test_util.hpp"

using namespace qdev;
using namespace qdev::testing;

namespace {

RealVector vec1(double x) { return (RealVector(1) << x).finished(); }

MeasurementSetup scalar_setup(cplx c, bool brownian) {
    Lindbladian l(Matrix::Zero(1, 1), {c * Matrix::Identity(1, 1)});
    return MeasurementSetup(stationary_state(l), {vec1(1.0)}, brownian ? 1 : 0);
}

RealVector unit(Index k, Index i) {
    RealVector u = RealVector::Zero(k);
    u(i) = 1.0;
    return u;
}

const DensityOperator kOne(Matrix::Identity(1, 1));

// Standard normal upper tail, independent of the library.
double normal_tail(double z) { return 0.5 * std::erfc(z / std::sqrt(2.0)); }

}  // namespace

TEST(Config, Validation) {
    TrajectoryConfig c;
    c.dt = 0.0;
    EXPECT_THROW(c.validate(), ValidationError);
    c.dt = 0.1;
    c.t_max = 0.05;
    EXPECT_THROW(c.validate(), ValidationError);
    c.t_max = 1.0;
    EXPECT_EQ(c.steps(), 10);
    EXPECT_EQ(c.checkpoint_step(0.5), 5);
    EXPECT_THROW(c.checkpoint_step(0.0), ValidationError);
    EXPECT_THROW(c.checkpoint_step(1.5), ValidationError);
}

TEST(Path, PureBrownianEstimatorIsScaledNoise) {
    MeasurementSetup s = scalar_setup(0.0, true);
    TrajectoryConfig c;
    c.dt = 0.01;
    c.t_max = 2.0;
    c.base_seed = 7;
    c.store_states = true;
    PathRecord p = simulate_path(s, kOne, c, {1.0, 2.0}, 3);
    // oracle: replay the same stream
    std::mt19937_64 eng = make_stream(7, 3, 0, 0);
    std::normal_distribution<double> n(0.0, 1.0);
    double w = 0.0, w1 = 0.0;
    for (int i = 1; i <= 200; ++i) {
        w += std::sqrt(0.01) * n(eng);
        if (i == 100) w1 = w;
    }
    EXPECT_NEAR(p.estimators[0](0), w1 / 1.0, 1e-12);
    EXPECT_NEAR(p.estimators[1](0), w / 2.0, 1e-12);
    EXPECT_NEAR(p.states[1](0, 0).real(), 1.0, 1e-15);
    EXPECT_EQ(p.invalid_steps, 0);
}

TEST(Path, PoissonCountsHaveRateMuSquared) {
    const cplx c(0.8, 0.6);  // |c|^2 = 1
    MeasurementSetup s = scalar_setup(c, false);
    TrajectoryConfig cfg;
    cfg.dt = 1e-3;
    cfg.t_max = 5.0;
    cfg.n_paths = 4000;
    cfg.base_seed = 11;
    EnsembleResult e = run_ensemble(s, kOne, cfg, vec1(-std::numeric_limits<double>::infinity()), {5.0});
    const CheckpointSummary& cp = e.checkpoints[0];
    EXPECT_NEAR(cp.estimator_mean(0), 1.0, 3 * cp.estimator_stderr(0));
    EXPECT_NEAR(cp.estimator_stderr(0), std::sqrt(1.0 / 5.0 / 4000.0), 0.1 * std::sqrt(1.0 / 5.0 / 4000.0));
    EXPECT_EQ(cp.tail.estimate, 1.0);  // disabled channel sentinel
    for (const PathRecord& p : e.paths) EXPECT_GE(p.estimators[0](0), 0.0);
}

TEST(Ensemble, GaussianTailWithinClopperPearson) {
    MeasurementSetup s = scalar_setup(0.0, true);
    TrajectoryConfig cfg;
    cfg.dt = 1e-3;
    cfg.t_max = 4.0;
    cfg.n_paths = 10000;
    cfg.base_seed = 2024;
    auto start = std::chrono::steady_clock::now();
    EnsembleResult e = run_ensemble(s, kOne, cfg, vec1(1.0), {4.0});
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const EmpiricalTail& tail = e.checkpoints[0].tail;
    const double exact = normal_tail(2.0);
    EXPECT_NEAR(exact, 0.02275, 1e-5);
    EXPECT_LE(tail.ci.lower, exact);
    EXPECT_GE(tail.ci.upper, exact);
    EXPECT_LT(secs, 30.0);

    DensityOperator one(Matrix::Identity(1, 1));
    BoundReport rep = main_bound(s, one, vec1(1.0));
    EXPECT_TRUE(compare_with_bound(tail, rep, 4.0).consistent);
}

TEST(Ensemble, DeterministicAcrossThreadCounts) {
    std::mt19937_64 rng(71);
    MeasurementSetup s(stationary_state(models::depolarizing(FaithfulState(random_density(rng, 2)))),
                       {unit(4, 1), unit(4, 2)}, 1);
    DensityOperator rho0(random_density(rng, 2));
    TrajectoryConfig cfg;
    cfg.dt = 1e-2;
    cfg.t_max = 1.0;
    cfg.n_paths = 50;
    cfg.base_seed = 99;
    RealVector r(2);
    r << 0.1, 0.0;
    EnsembleResult a = run_ensemble(s, rho0, cfg, r, {0.5, 1.0});
    cfg.threads = 3;
    EnsembleResult b = run_ensemble(s, rho0, cfg, r, {0.5, 1.0});
    for (std::size_t i = 0; i < a.paths.size(); ++i)
        for (std::size_t c = 0; c < 2; ++c)
            EXPECT_EQ((a.paths[i].estimators[c] - b.paths[i].estimators[c]).cwiseAbs().maxCoeff(), 0.0);
    EXPECT_EQ(a.checkpoints[1].tail.exceedances, b.checkpoints[1].tail.exceedances);
    EXPECT_EQ(a.checkpoints[1].estimator_mean, b.checkpoints[1].estimator_mean);
    cfg.base_seed = 100;
    EnsembleResult c = run_ensemble(s, rho0, cfg, r, {0.5, 1.0});
    EXPECT_NE(a.checkpoints[1].estimator_mean, c.checkpoints[1].estimator_mean);
}

TEST(ClopperPearson, ClosedFormEndpointsAndCoverage) {
    ConfidenceInterval z = clopper_pearson(0, 10);
    EXPECT_EQ(z.lower, 0.0);
    EXPECT_NEAR(z.upper, 1.0 - std::pow(0.005, 0.1), 1e-12);
    ConfidenceInterval f = clopper_pearson(10, 10);
    EXPECT_EQ(f.upper, 1.0);
    EXPECT_NEAR(f.lower, std::pow(0.005, 0.1), 1e-12);
    for (Index k = 0; k <= 40; ++k) {
        ConfidenceInterval ci = clopper_pearson(k, 40);
        EXPECT_LE(ci.lower, k / 40.0);
        EXPECT_GE(ci.upper, k / 40.0);
    }
    EXPECT_THROW(clopper_pearson(5, 3), ValidationError);
}

TEST(Compare, GaussianBoundGridAndAdversarial) {
    MeasurementSetup s = scalar_setup(0.0, true);
    EmpiricalTail empty;
    empty.n_paths = 100;
    empty.ci = clopper_pearson(0, 100);
    BoundReport rep = main_bound(s, kOne, vec1(0.5));
    EXPECT_TRUE(compare_with_bound(empty, rep, 3.0).consistent);

    // exact Gaussian tails fed as perfectly resolved empirical tails
    for (double t : {0.5, 1.0, 4.0, 10.0})
        for (double r : {0.1, 0.5, 1.0, 2.0}) {
            EmpiricalTail tail;
            tail.estimate = normal_tail(r * std::sqrt(t));
            tail.ci = {tail.estimate, tail.estimate};
            BoundReport b = main_bound(s, kOne, vec1(r));
            EXPECT_TRUE(compare_with_bound(tail, b, t).consistent) << t << " " << r;
        }

    TrajectoryConfig cfg;
    cfg.dt = 1e-3;
    cfg.t_max = 4.0;
    cfg.n_paths = 10000;
    cfg.base_seed = 5;
    EnsembleResult e = run_ensemble(s, kOne, cfg, vec1(1.5), {4.0});
    BoundReport b = main_bound(s, kOne, vec1(1.5));
    EXPECT_TRUE(compare_with_bound(e.checkpoints[0].tail, b, 4.0).consistent);
    b.exponent *= 2.0;  // bound halved on the log scale
    EXPECT_FALSE(compare_with_bound(e.checkpoints[0].tail, b, 4.0).consistent);
}

TEST(MeanDynamics, DepolarizingQubitMatchesSemigroup) {
    std::mt19937_64 rng(72);
    Matrix sigma = random_density(rng, 2);
    MeasurementSetup s(stationary_state(models::depolarizing(FaithfulState(sigma))), {unit(4, 1)}, 1);
    Matrix r0 = Matrix::Zero(2, 2);
    r0(1, 1) = 1.0;
    DensityOperator rho0(r0);
    TrajectoryConfig cfg;
    cfg.dt = 1e-3;
    cfg.t_max = 2.0;
    cfg.n_paths = 2000;
    cfg.base_seed = 17;
    cfg.store_states = true;
    std::vector<double> cps = {0.4, 0.8, 1.2, 1.6, 2.0};
    EnsembleResult e = run_ensemble(s, rho0, cfg, vec1(0.0), cps);
    for (const CheckpointSummary& cp : e.checkpoints) {
        MeanStateCheck chk = check_mean_state(s.context(), rho0, cp);
        EXPECT_TRUE(chk.ok) << cp.t << " " << chk.distance << " " << chk.tolerance;
    }
    EXPECT_GE(e.valid_fraction(), 0.99);

    // Estimator mean equals (1/t) int_0^t Tr[O e^{sL*} rho0] ds (the noise has mean zero).
    const Matrix& lu = s.tilted_jump(0);
    const Matrix o = lu + lu.adjoint();
    const CheckpointSummary& last = e.checkpoints.back();
    double integral = 0.0;
    const int n = 400;
    for (int i = 0; i <= n; ++i) {
        const double t = last.t * i / n;
        const double w = (i == 0 || i == n) ? 0.5 : 1.0;
        integral += w * (o * evolved_state(s.context(), rho0, t)).trace().real() * last.t / n;
    }
    EXPECT_NEAR(last.estimator_mean(0), integral / last.t, 4 * last.estimator_stderr(0) + 2e-3);
}

TEST(MeanDynamics, EvolvedStateLimits) {
    std::mt19937_64 rng(73);
    Matrix sigma = random_density(rng, 3);
    GeneratorContext ctx = stationary_state(models::depolarizing(FaithfulState(sigma)));
    DensityOperator rho0(random_density(rng, 3));
    EXPECT_LT(max_norm(evolved_state(ctx, rho0, 0.0) - rho0.matrix()), 1e-14);
    // closed form e^{-t} rho + (1 - e^{-t}) sigma
    const double t = 0.7;
    EXPECT_LT(max_norm(evolved_state(ctx, rho0, t) - (std::exp(-t) * rho0.matrix() + (1 - std::exp(-t)) * sigma)), 1e-12);
}

TEST(Linear, MartingaleMean) {
    TrajectoryConfig cfg;
    cfg.dt = 1e-3;
    cfg.t_max = 1.0;
    cfg.n_paths = 2000;
    cfg.base_seed = 3;
    LinearEnsembleResult zero = run_linear_ensemble(scalar_setup(0.0, true), kOne, cfg, {0.5, 1.0});
    EXPECT_EQ(zero.mean_z[1], 1.0);
    EXPECT_EQ(zero.stderr_z[1], 0.0);

    LinearEnsembleResult g = run_linear_ensemble(scalar_setup(cplx(0.5, 0.3), true), kOne, cfg, {0.5, 1.0});
    for (std::size_t i = 0; i < 2; ++i) EXPECT_NEAR(g.mean_z[i], 1.0, 3 * g.stderr_z[i]);

    std::mt19937_64 rng(74);
    MeasurementSetup s(stationary_state(models::depolarizing(FaithfulState(random_density(rng, 2)))),
                       {unit(4, 1), unit(4, 2)}, 1);
    cfg.t_max = 5.0;
    LinearEnsembleResult d = run_linear_ensemble(s, DensityOperator(random_density(rng, 2)), cfg, {1.0, 5.0});
    EXPECT_EQ(d.failed_paths, 0);
    for (std::size_t i = 0; i < 2; ++i) EXPECT_NEAR(d.mean_z[i], 1.0, 3 * d.stderr_z[i]);
}

TEST(Linear, ClosedFormGeometricPath) {
    // dim 1 Brownian: Z_{n+1} = |1 - |c|^2 dt / 2 + c dW|^2 Z_n with the replayed stream
    const cplx c(0.4, -0.2);
    TrajectoryConfig cfg;
    cfg.dt = 0.01;
    cfg.t_max = 1.0;
    cfg.base_seed = 21;
    LinearPathRecord p = simulate_linear_path(scalar_setup(c, true), kOne, cfg, {1.0}, 4);
    std::mt19937_64 eng = make_stream(21, 4, 0, 0, 1);
    std::normal_distribution<double> n(0.0, 1.0);
    double z = 1.0;
    for (int i = 0; i < 100; ++i) z *= std::norm(1.0 - 0.5 * std::norm(c) * 0.01 + c * (0.1 * n(eng)));
    EXPECT_NEAR(p.z[0], z, 1e-12);
}
