#include "qdev/acceptance.hpp"

#include <chrono>
#include <cmath>
#include <filesystem>
#include <limits>
#include <random>
#include <sstream>

#include <unistd.h>

#include "qdev/cli.hpp"
#include "qdev/deviation.hpp"
#include "qdev/inequalities.hpp"
#include "qdev/io.hpp"
#include "qdev/models.hpp"
#include "qdev/trajectories.hpp"

namespace qdev::acceptance {

namespace {

namespace fs = std::filesystem;

RealVector vec1(double x) { return RealVector::Constant(1, x); }

RealVector unit(Index k, Index i) {
    RealVector u = RealVector::Zero(k);
    u(i) = 1.0;
    return u;
}

Matrix diag(const RealVector& v) { return v.cast<cplx>().asDiagonal(); }

Matrix pauli_z() { return diag((RealVector(2) << 1.0, -1.0).finished()); }

MeasurementSetup scalar_setup(cplx c, bool brownian) {
    Lindbladian l(Matrix::Zero(1, 1), {c * Matrix::Identity(1, 1)});
    return MeasurementSetup(stationary_state(l), {vec1(1.0)}, brownian ? 1 : 0);
}

// Full-rank density with eigenvalues at least floor/d.
Matrix random_density(std::mt19937_64& rng, Index d, double floor = 0.05) {
    std::normal_distribution<double> n(0.0, 1.0);
    Matrix a(d, d);
    for (Index i = 0; i < d; ++i)
        for (Index j = 0; j < d; ++j) a(i, j) = cplx(n(rng), n(rng));
    Matrix rho = a * a.adjoint();
    rho /= rho.trace().real();
    rho = (1.0 - floor) * rho + floor * Matrix::Identity(d, d) / static_cast<double>(d);
    return 0.5 * (rho + rho.adjoint());
}

double max_abs(const Matrix& m) { return m.size() == 0 ? 0.0 : m.cwiseAbs().maxCoeff(); }

double normal_tail(double z) { return 0.5 * std::erfc(z / std::sqrt(2.0)); }

std::string num(double x) {
    std::ostringstream os;
    os.precision(6);
    os << x;
    return os.str();
}

// Collects the sub-checks of one criterion; the first failure is kept as the detail.
struct Checks {
    bool ok = true;
    std::string first_failure;
    std::vector<std::string> notes;

    void require(bool cond, const std::string& what) {
        if (!cond && ok) {
            ok = false;
            first_failure = what;
        }
    }
    void note(const std::string& s) { notes.push_back(s); }

    std::string detail() const {
        if (!ok) return first_failure;
        std::string out;
        for (const auto& n : notes) out += (out.empty() ? "" : "; ") + n;
        return out;
    }
};

void gaussian(Checks& c, const Options&) {
    MeasurementSetup s = scalar_setup(0.0, true);
    DensityOperator one(Matrix::Identity(1, 1));
    BoundReport rep = main_bound(s, one, vec1(1.0));
    c.require(std::abs(rep.exponent - 0.5) <= 1e-10, "exponent " + num(rep.exponent) + " != 0.5");

    TrajectoryConfig cfg;
    cfg.dt = 1e-3;
    cfg.t_max = 4.0;
    cfg.n_paths = 10000;
    cfg.base_seed = 2024;
    cfg.threads = 1;
    const auto start = std::chrono::steady_clock::now();
    EnsembleResult e = run_ensemble(s, one, cfg, vec1(1.0), {4.0});
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const EmpiricalTail& tail = e.checkpoints[0].tail;
    const double exact = normal_tail(2.0);
    c.require(tail.ci.lower <= exact && exact <= tail.ci.upper,
              "exact tail " + num(exact) + " outside [" + num(tail.ci.lower) + ", " + num(tail.ci.upper) + "]");
    c.require(compare_with_bound(tail, rep, 4.0).consistent, "compare_with_bound inconsistent");
    c.require(secs < 30.0, "simulation took " + num(secs) + " s");
    c.note("exponent=" + num(rep.exponent) + " tail=" + num(tail.estimate) + " exact=" + num(exact) +
           " sim=" + num(secs) + "s");
}

void poisson(Checks& c, const Options& opt) {
    MeasurementSetup s = scalar_setup(1.0, false);
    DensityOperator one(Matrix::Identity(1, 1));
    BoundReport rep = main_bound(s, one, vec1(1.0));
    const double oracle = 2.0 * std::log(2.0) - 1.0;
    c.require(std::abs(rep.exponent - oracle) <= 1e-8, "exponent " + num(rep.exponent) + " != 2 ln 2 - 1");

    TrajectoryConfig cfg;
    cfg.t_max = 20.0;
    cfg.n_paths = 10000;
    cfg.base_seed = 4242;
    cfg.threads = opt.threads;
    cfg.dt = 1e-3;
    const EmpiricalTail coarse = run_ensemble(s, one, cfg, vec1(1.0), {20.0}).checkpoints[0].tail;
    cfg.dt = 5e-4;
    const EmpiricalTail fine = run_ensemble(s, one, cfg, vec1(1.0), {20.0}).checkpoints[0].tail;
    c.require(compare_with_bound(coarse, rep, 20.0).consistent, "tail at t=20 not dominated by the bound");
    c.require(compare_with_bound(fine, rep, 20.0).consistent, "tail at t=20 (dt=5e-4) not dominated by the bound");
    const double width = std::min(coarse.ci.upper - coarse.ci.lower, fine.ci.upper - fine.ci.lower);
    const double diff = std::abs(coarse.estimate - fine.estimate);
    c.require(diff < width, "dt halving moved the tail by " + num(diff) + " >= CI width " + num(width));
    c.note("exponent=" + num(rep.exponent) + " bound=" + num(rep.bound(20.0)) + " tail(1e-3)=" + num(coarse.estimate) +
           " tail(5e-4)=" + num(fine.estimate) + " ci_width=" + num(width));
}

void legendre(Checks& c, const Options&) {
    std::mt19937_64 rng(59);
    double worst_rate = 0.0, worst_cross = 0.0;
    for (Index d : {2, 3}) {
        MeasurementSetup s(stationary_state(models::depolarizing(FaithfulState(random_density(rng, d)))),
                           {unit(d * d, 1)}, 1);
        const RealVector m = mean_vector(s);
        DensityOperator sig(s.sigma().matrix());
        for (double r : {0.1, 0.3, 1.0}) {
            const double exponent = main_bound(s, sig, vec1(r)).exponent;
            const double rate = rate_function(s, {m + vec1(r)}).points[0].value;
            const double cross = direct_variational_crosscheck(s, vec1(r));
            worst_rate = std::max(worst_rate, std::abs(rate - exponent));
            worst_cross = std::max(worst_cross, std::abs(cross - exponent));
            c.require(std::abs(rate - exponent) <= 1e-6, "d=" + std::to_string(d) + " r=" + num(r) + ": rate " +
                                                             num(rate) + " vs exponent " + num(exponent));
            c.require(std::abs(cross - exponent) <= 1e-5, "d=" + std::to_string(d) + " r=" + num(r) +
                                                              ": cross-check " + num(cross) + " vs " + num(exponent));
        }
    }
    c.note("max |I-J|=" + num(worst_rate) + " max |cross-J|=" + num(worst_cross));
}

void classical(Checks& c, const Options&) {
    const RealVector pi = (RealVector(3) << 0.5, 0.3, 0.2).finished();
    RealMatrix sym(3, 3);
    sym << 0, 0.2, 0.1, 0.2, 0, 0.15, 0.1, 0.15, 0;
    RealMatrix q(3, 3);
    for (int i = 0; i < 3; ++i) {
        for (int j = 0; j < 3; ++j) q(i, j) = i == j ? 0.0 : sym(i, j) / pi(i);
        q(i, i) = -q.row(i).sum();
    }
    models::ClassicalChain chain(q);
    c.require(chain.reversible(), "chain not detected as reversible");
    GeneratorContext ctx = stationary_state(models::classical_embedding(chain));

    std::mt19937_64 rng(42);
    std::normal_distribution<double> n(0.0, 1.0);
    double worst = 0.0;
    for (int trial = 0; trial < 50; ++trial) {
        RealVector g(3);
        for (int i = 0; i < 3; ++i) g(i) = n(rng);
        double oracle = 0.0;
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) oracle += 0.5 * pi(i) * q(i, j) * (g(i) - g(j)) * (g(i) - g(j));
        worst = std::max(worst, std::abs(dirichlet_form(ctx, diag(g)) - oracle));
    }
    c.require(worst <= 1e-12, "Dirichlet form off by " + num(worst));

    // classical gap from the pi-symmetrized rate matrix
    RealMatrix d_half = pi.cwiseSqrt().asDiagonal();
    RealMatrix d_inv_half = pi.cwiseSqrt().cwiseInverse().asDiagonal();
    RealMatrix symq = d_half * q * d_inv_half;
    Eigen::SelfAdjointEigenSolver<RealMatrix> es(0.5 * (symq + symq.transpose()));
    const double classical_gap = -es.eigenvalues()(1);
    const double quantum_gap = spectral_gap(ctx);
    c.require(std::abs(classical_gap - quantum_gap) <= 1e-10,
              "gap " + num(quantum_gap) + " vs classical " + num(classical_gap));
    c.note("dirichlet err=" + num(worst) + " gap=" + num(quantum_gap) + " classical=" + num(classical_gap));
}

void closed_forms(Checks& c, const Options&) {
    for (Index d : {3, 4}) {
        const double s = 1.0 / static_cast<double>(d);
        const double oracle = (1.0 - 2.0 * s) / std::log((1.0 - s) / s);
        const double alpha = lsi_depolarizing(FaithfulState(DensityOperator::maximally_mixed(d)));
        c.require(std::abs(alpha - oracle) <= 1e-12, "alpha2(id/" + std::to_string(d) + ")=" + num(alpha));
        const double ti = ti_from_lsi(alpha);
        c.require(std::abs(ti - 1.0 / (8.0 * alpha * alpha)) <= 1e-12 * ti, "ti_from_lsi mismatch");
    }
    c.require(std::abs(lsi_depolarizing(FaithfulState(DensityOperator::maximally_mixed(3))) - 1.0 / (3.0 * std::log(2.0))) <= 1e-12,
              "alpha2(id/3) != 1/(3 ln 2)");
    c.require(std::abs(lsi_depolarizing(FaithfulState(DensityOperator::maximally_mixed(4))) - 2.0 / (4.0 * std::log(3.0))) <= 1e-12,
              "alpha2(id/4) != 2/(4 ln 3)");

    std::mt19937_64 rng(31);
    double worst_gap = 0.0;
    for (Index d : {2, 3, 4}) {
        worst_gap = std::max(worst_gap, std::abs(spectral_gap(stationary_state(
                                                     models::depolarizing(FaithfulState(random_density(rng, d))))) - 1.0));
    }
    c.require(worst_gap <= 1e-10, "depolarizing gap off by " + num(worst_gap));

    std::uniform_real_distribution<double> u(-2.0, 2.0);
    double worst_lip = 0.0;
    for (Index d : {2, 3, 4}) {
        LipschitzContext lip(FaithfulState(DensityOperator::maximally_mixed(d)), models::matrix_unit_derivations(d));
        for (int trial = 0; trial < 10; ++trial) {
            RealVector o(d);
            for (Index i = 0; i < d; ++i) o(i) = u(rng);
            double sum = 0.0;
            for (Index x = 0; x < d; ++x)
                for (Index y = 0; y < d; ++y) sum += (o(x) - o(y)) * (o(x) - o(y));
            const double l = lipschitz_norm(lip, diag(o));
            worst_lip = std::max(worst_lip, std::abs(l * l - 2.0 * sum));
        }
    }
    c.require(worst_lip <= 1e-12, "Lipschitz^2 off by " + num(worst_lip));
    c.note("gap err=" + num(worst_gap) + " lipschitz err=" + num(worst_lip));
}

void inequality_chain(Checks& c, const Options&) {
    std::mt19937_64 rng(23);
    int violations = 0;
    double worst_ti = -std::numeric_limits<double>::infinity(), worst_pi = worst_ti;
    for (Index d : {2, 3}) {
        GeneratorContext ctx = stationary_state(models::depolarizing(FaithfulState(DensityOperator::maximally_mixed(d))));
        LipschitzContext lip(ctx);
        const double ct = ti_from_lsi(lsi_depolarizing(ctx.sigma()));
        DensityOperator sigma(ctx.sigma().matrix());
        for (int i = 0; i < 100; ++i) {
            DensityOperator rho(random_density(rng, d, 0.01));
            const double w = w1_lower_bound(lip, rho, sigma);
            const double rhs = std::sqrt(2.0 * ct * fisher_information(ctx, rho.matrix()));
            worst_ti = std::max(worst_ti, w - rhs);
            if (w > rhs + 1e-8) ++violations;
            InequalityCheck p = verify_poincare_ti(ctx, rho);
            worst_pi = std::max(worst_pi, p.lhs - p.rhs);
            if (p.lhs > p.rhs + 1e-9) ++violations;
        }
    }
    c.require(violations == 0, std::to_string(violations) + " violations");
    c.note("violations=0 max(W1-rhs)=" + num(worst_ti) + " max(tn^2-rhs)=" + num(worst_pi));
}

void trajectory_physics(Checks& c, const Options& opt) {
    std::mt19937_64 rng(72);
    MeasurementSetup s(stationary_state(models::depolarizing(FaithfulState(random_density(rng, 2)))), {unit(4, 1)}, 1);
    Matrix r0 = Matrix::Zero(2, 2);
    r0(1, 1) = 1.0;
    DensityOperator rho0(r0);
    TrajectoryConfig cfg;
    cfg.dt = 1e-3;
    cfg.t_max = 2.0;
    cfg.n_paths = 10000;
    cfg.base_seed = 17;
    cfg.threads = opt.threads;
    cfg.store_states = true;
    const std::vector<double> cps = {0.4, 0.8, 1.2, 1.6, 2.0};
    EnsembleResult e = run_ensemble(s, rho0, cfg, vec1(0.0), cps);
    double worst = 0.0;
    for (const CheckpointSummary& cp : e.checkpoints) {
        MeanStateCheck chk = check_mean_state(s.context(), rho0, cp);
        worst = std::max(worst, chk.distance / chk.tolerance);
        c.require(chk.ok, "t=" + num(cp.t) + ": distance " + num(chk.distance) + " > " + num(chk.tolerance));
    }

    cfg.store_states = false;
    LinearEnsembleResult lin = run_linear_ensemble(s, rho0, cfg, cps);
    double worst_z = 0.0;
    for (std::size_t i = 0; i < lin.t.size(); ++i) {
        const double z = std::abs(lin.mean_z[i] - 1.0) / lin.stderr_z[i];
        worst_z = std::max(worst_z, z);
        c.require(std::abs(lin.mean_z[i] - 1.0) <= 3.0 * lin.stderr_z[i],
                  "martingale mean " + num(lin.mean_z[i]) + " at t=" + num(lin.t[i]));
    }
    c.note("max distance/tolerance=" + num(worst) + " max |Z-1|/stderr=" + num(worst_z));
}

void appendix_b(Checks& c, const Options&) {
    models::AppendixB fx = models::appendix_b_fixtures();
    FaithfulState sigma(fx.sigma_phi);
    auto kms = check_detailed_balance(InnerProductKind::KMS, sigma, fx.psi);
    auto bkm = check_detailed_balance(InnerProductKind::BKM, sigma, fx.psi);
    c.require(kms.deviation <= 1e-10, "psi KMS deviation " + num(kms.deviation));
    c.require(bkm.deviation > 1e-6, "psi BKM deviation " + num(bkm.deviation));
    auto kms_t = check_detailed_balance(InnerProductKind::KMS, sigma, fx.psi_tilde);
    auto bkm_t = check_detailed_balance(InnerProductKind::BKM, sigma, fx.psi_tilde);
    c.require(bkm_t.deviation <= 1e-10, "psi_tilde BKM deviation " + num(bkm_t.deviation));
    c.require(kms_t.deviation > 1e-6, "psi_tilde KMS deviation " + num(kms_t.deviation));

    FaithfulState ps(fx.p_sigma);
    auto pk = check_detailed_balance(InnerProductKind::KMS, ps, fx.p_channel);
    auto pb = check_detailed_balance(InnerProductKind::BKM, ps, fx.p_channel);
    c.require(pk.symmetric && pb.symmetric, "p-channel not KMS and BKM symmetric");
    SuperOperator gns = dual_superoperator(InnerProductKind::GNS, ps, fx.p_channel);
    Vector x(2);
    x << 1.0, -1.0;
    const double witness = x.dot(gns.apply(Matrix::Ones(2, 2)) * x).real();
    c.require(witness <= 0.0, "GNS witness " + num(witness) + " > 0");
    c.note("psi kms=" + num(kms.deviation) + " bkm=" + num(bkm.deviation) + "; psi_tilde kms=" + num(kms_t.deviation) +
           " bkm=" + num(bkm_t.deviation) + "; witness=" + num(witness));
}

void tensorization(Checks& c, const Options&) {
    GeneratorContext q = stationary_state(models::depolarizing(FaithfulState(DensityOperator::maximally_mixed(3))));
    const double expected = 1.0 / (std::log(std::pow(3.0, 5)) + 11.0);
    std::vector<GeneratorContext> factors;
    std::vector<Lindbladian> ls;
    for (int n = 1; n <= 3; ++n) {
        factors.push_back(q);
        ls.push_back(q.lindbladian);
        LsiBracket b = tensorization_lsi_bounds(factors);
        c.require(std::abs(b.lower - expected) <= 1e-12, "N=" + std::to_string(n) + " lower " + num(b.lower));
        c.require(std::abs(b.upper - 0.5) <= 1e-12, "N=" + std::to_string(n) + " upper " + num(b.upper));
        c.require(b.lower <= b.upper, "lower above upper");
        const double gap = spectral_gap(stationary_state(models::tensor_product(ls)));
        c.require(std::abs(gap - 1.0) <= 1e-10, "N=" + std::to_string(n) + " product gap " + num(gap));
    }
    c.note("lower=" + num(expected) + " upper=0.5 for N=1..3");
}

models::CommutingHamiltonian ising_pair(double beta) {
    models::CommutingHamiltonian h;
    h.n_sites = 2;
    h.local_dim = 2;
    h.beta = beta;
    h.terms.push_back({{0, 1}, kron(pauli_z(), pauli_z())});
    return h;
}

void heat_bath(Checks& c, const Options&) {
    double worst_stat = 0.0;
    for (double beta : {0.0, 0.5, 1.0}) {
        models::HeatBath hb = models::heat_bath(ising_pair(beta));
        const double stat = max_abs(apply_adjoint_generator(hb.generator, hb.gibbs));
        worst_stat = std::max(worst_stat, stat);
        c.require(stat <= 1e-9, "beta=" + num(beta) + ": stationarity residual " + num(stat));
        for (const SuperOperator& psi : hb.channels) {
            c.require(max_abs(psi.apply(Matrix::Identity(4, 4)) - Matrix::Identity(4, 4)) <= 1e-10,
                      "beta=" + num(beta) + ": channel not unital");
            c.require(models::choi_eigenvalues(psi).minCoeff() >= -1e-10, "beta=" + num(beta) + ": channel not CP");
        }
        if (beta == 0.0) {
            Lindbladian dep = models::depolarizing(FaithfulState(DensityOperator::maximally_mixed(2)));
            const double diff = max_abs(heisenberg_superoperator(hb.generator).matrix() -
                                        heisenberg_superoperator(models::tensor_product({dep, dep})).matrix());
            c.require(diff <= 1e-10, "beta=0 differs from tensor depolarizing by " + num(diff));
        }
    }
    c.note("max stationarity residual=" + num(worst_stat));
}

std::string run_cli(const std::vector<std::string>& args) {
    std::ostringstream out, err;
    const int code = cli::dispatch(args, out, err);
    if (code != 0) throw ValidationError("qdev exited with " + std::to_string(code) + ": " + err.str(), args.front());
    return out.str();
}

void determinism(Checks& c, const Options& opt) {
    fs::path dir = opt.work_dir.empty() ? fs::temp_directory_path() / ("qdev-acceptance-" + std::to_string(::getpid()))
                                        : fs::path(opt.work_dir);
    fs::create_directories(dir);
    const std::string model = (dir / "model.json").string();
    const std::string setup = (dir / "setup.json").string();
    const std::string config = (dir / "config.json").string();
    run_cli({"--out", model, "model", "new", "depolarizing", "--dim", "2", "--sigma", "[0.7, 0.3]"});
    io::write_text_file(setup, R"({"directions": [[0, 1, 0, 0], [0, 0, 1, 0]], "q": 1})");
    io::write_text_file(config,
                        R"({"dt": 0.01, "t_max": 1.0, "n_paths": 300, "checkpoints": [0.5, 1.0], "r": [0.1, 0.0]})");
    std::vector<std::string> outputs;
    for (const char* threads : {"1", "3", "1", "3"}) {
        const std::string out = (dir / ("sim_" + std::to_string(outputs.size()) + ".csv")).string();
        run_cli({"--seed", "1234", "--threads", threads, "--out", out, "simulate", "--model", model, "--setup", setup,
                 "--config", config});
        outputs.push_back(io::read_text_file(out));
    }
    for (std::size_t i = 1; i < outputs.size(); ++i)
        c.require(outputs[i] == outputs[0], "run " + std::to_string(i) + " differs from run 0");
    c.require(!outputs[0].empty(), "empty CSV");
    if (opt.work_dir.empty()) fs::remove_all(dir);
    c.note("4 runs (threads 1,3,1,3) byte-identical, " + std::to_string(outputs[0].size()) + " bytes");
}

struct Criterion {
    int id;
    const char* name;
    void (*fn)(Checks&, const Options&);
};

const Criterion kCriteria[] = {
    {1, "gaussian_fixture", gaussian},
    {2, "poisson_fixture", poisson},
    {3, "legendre_duality", legendre},
    {4, "classical_reduction", classical},
    {5, "closed_form_constants", closed_forms},
    {6, "inequality_chain", inequality_chain},
    {7, "trajectory_physics", trajectory_physics},
    {8, "appendix_b_classification", appendix_b},
    {9, "tensorization_bracket", tensorization},
    {10, "heat_bath_stationarity", heat_bath},
    {11, "cli_determinism", determinism},
};

}  // namespace

std::string format_line(const CriterionResult& r) {
    std::ostringstream os;
    os.setf(std::ios::fixed);
    os.precision(1);
    os << (r.pass ? "PASS" : "FAIL") << " " << r.id << " " << r.name << " (" << r.seconds << " s): " << r.detail;
    return os.str();
}

std::vector<CriterionResult> run_all(const Options& options, const std::function<void(const CriterionResult&)>& on_result) {
    std::vector<CriterionResult> results;
    for (const Criterion& k : kCriteria) {
        CriterionResult r;
        r.id = k.id;
        r.name = k.name;
        const auto start = std::chrono::steady_clock::now();
        try {
            Checks c;
            k.fn(c, options);
            r.pass = c.ok;
            r.detail = c.detail();
        } catch (const std::exception& e) {
            r.pass = false;
            r.detail = std::string("exception: ") + e.what();
        }
        r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        if (on_result) on_result(r);
        results.push_back(std::move(r));
    }
    return results;
}

}  // namespace qdev::acceptance
