#include "qdev/trajectories.hpp"

#include <boost/math/distributions/beta.hpp>
#include <unsupported/Eigen/MatrixFunctions>

#include <algorithm>
#include <cmath>
#include <exception>
#include <limits>
#include <thread>

namespace qdev {

Index TrajectoryConfig::steps() const { return static_cast<Index>(std::llround(t_max / dt)); }

Index TrajectoryConfig::checkpoint_step(double t) const {
    if (!(t > 0)) throw ValidationError("checkpoints must be positive", "checkpoints");
    if (t > t_max * (1 + 1e-12)) throw ValidationError("checkpoint beyond t_max", "checkpoints");
    return std::max<Index>(1, static_cast<Index>(std::llround(t / dt)));
}

void TrajectoryConfig::validate() const {
    if (!(dt > 0) || !std::isfinite(dt)) throw ValidationError("dt must be positive", "dt");
    if (!(t_max >= dt) || !std::isfinite(t_max)) throw ValidationError("t_max must be at least dt", "t_max");
    if (n_paths < 1) throw ValidationError("n_paths must be positive", "n_paths");
    if (!(positivity_clip >= 0)) throw ValidationError("positivity_clip must be nonnegative", "positivity_clip");
    if (threads < 1) throw ValidationError("threads must be positive", "threads");
}

std::mt19937_64 make_stream(std::uint64_t base_seed, Index path, Index channel, int attempt, int domain) {
    const auto p = static_cast<std::uint64_t>(path);
    std::seed_seq seq{static_cast<std::uint32_t>(base_seed), static_cast<std::uint32_t>(base_seed >> 32),
                      static_cast<std::uint32_t>(p), static_cast<std::uint32_t>(p >> 32),
                      static_cast<std::uint32_t>(channel), static_cast<std::uint32_t>(attempt),
                      static_cast<std::uint32_t>(domain)};
    return std::mt19937_64(seq);
}

namespace {

struct CheckpointPlan {
    std::vector<std::pair<Index, std::size_t>> order;  // (step, checkpoint index) sorted by step
    Index last_step = 0;
};

CheckpointPlan plan_checkpoints(const TrajectoryConfig& config, const std::vector<double>& checkpoints) {
    if (checkpoints.empty()) throw ValidationError("at least one checkpoint is required", "checkpoints");
    CheckpointPlan plan;
    for (std::size_t i = 0; i < checkpoints.size(); ++i)
        plan.order.emplace_back(config.checkpoint_step(checkpoints[i]), i);
    std::sort(plan.order.begin(), plan.order.end());
    plan.last_step = plan.order.back().first;
    return plan;
}

struct ChannelStreams {
    std::vector<std::mt19937_64> engines;
    std::vector<std::normal_distribution<double>> normals;
    std::uniform_real_distribution<double> uniform{0.0, 1.0};
};

ChannelStreams open_streams(const TrajectoryConfig& config, Index channels, Index path, int attempt, int domain) {
    ChannelStreams s;
    for (Index j = 0; j < channels; ++j) {
        s.engines.push_back(make_stream(config.base_seed, path, j, attempt, domain));
        s.normals.emplace_back(0.0, 1.0);
    }
    return s;
}

// Preallocated Euler-Maruyama stepper shared by the normalized and linear equations.
class Stepper {
public:
    Stepper(const MeasurementSetup& setup, const TrajectoryConfig& config)
        : setup_(setup), config_(config), d_(setup.dim()), l_(setup.num_channels()),
          s_(setup.context().schrodinger.matrix()), sqrt_dt_(std::sqrt(config.dt)) {
        for (Index j = 0; j < l_; ++j) {
            jumps_.push_back(setup.tilted_jump(j));
            jumps_dag_.push_back(setup.tilted_jump(j).adjoint());
        }
        // M = I + G dt with G = -iH - K/2 + (number of Poisson channels)/2
        const Lindbladian& lind = setup.context().lindbladian;
        const double n_p = static_cast<double>(l_ - setup.num_brownian());
        g_dt_ = Matrix::Identity(d_, d_) +
                config.dt * (cplx(0, -1) * lind.hamiltonian() - 0.5 * lind.jump_norm_sum() +
                             0.5 * n_p * Matrix::Identity(d_, d_));
        const Index k = lind.num_jumps();
        RealMatrix u(k, l_);
        for (Index j = 0; j < l_; ++j) u.col(j) = setup.directions()[static_cast<std::size_t>(j)];
        Eigen::HouseholderQR<RealMatrix> qr(u);
        const RealMatrix q = qr.householderQ() * RealMatrix::Identity(k, k);
        for (Index c = l_; c < k; ++c) {
            Matrix lv = Matrix::Zero(d_, d_);
            for (Index i = 0; i < k; ++i) lv += q(i, c) * lind.jump(i);
            complement_.push_back(lv);
        }
        next_.resize(d_, d_);
        drift_.resize(d_, d_);
        a_.resize(d_, d_);
        b_.resize(d_, d_);
    }

    // One step of the normalized filter. Returns false on a degenerate jump.
    bool filter_step(Matrix& rho, ChannelStreams& rng, RealVector& integral, RealVector& w, RealVector& counts,
                     long& invalid) {
        const double dt = config_.dt;
        euler_drift(rho);
        for (Index j = 0; j < l_; ++j) {
            const auto ju = static_cast<std::size_t>(j);
            if (setup_.is_brownian(j)) {
                a_.noalias() = jumps_[ju] * rho;
                const double tr = 2.0 * a_.trace().real();
                const double db = sqrt_dt_ * rng.normals[ju](rng.engines[ju]);
                integral(j) += tr * dt;
                w(j) += db;
                next_ += db * a_;
                next_ += db * a_.adjoint();
                next_ -= (tr * db) * rho;
            } else {
                a_.noalias() = jumps_[ju] * rho;
                b_.noalias() = a_ * jumps_dag_[ju];
                const double p = b_.trace().real();
                next_ -= dt * b_;
                next_ += (p * dt) * rho;
                const double u = rng.uniform(rng.engines[ju]);
                if (u < std::min(1.0, std::max(0.0, p) * dt)) {
                    if (p < 1e-14) return false;
                    next_ += b_ / p;
                    next_ -= rho;
                    counts(j) += 1.0;
                }
            }
        }
        rho = 0.5 * (next_ + next_.adjoint());
        if (!make_positive(rho)) ++invalid;
        const double tr = rho.trace().real();
        if (!(tr > 0)) return false;
        rho /= tr;
        return true;
    }

    // One step of the linear equation under the reference measure, written in Kraus form so the
    // unnormalized state stays positive: with probability dt per Poisson channel sigma -> L sigma L^*,
    // otherwise sigma -> M sigma M^* + dt sum_v L_v sigma L_v^* over the unmonitored complement.
    // Returns true if a Poisson channel fired.
    bool linear_step(Matrix& sig, ChannelStreams& rng) {
        const double dt = config_.dt;
        bool fired = false;
        m_ = g_dt_;
        for (Index j = 0; j < l_; ++j) {
            const auto ju = static_cast<std::size_t>(j);
            if (setup_.is_brownian(j)) {
                m_ += (sqrt_dt_ * rng.normals[ju](rng.engines[ju])) * jumps_[ju];
            } else if (rng.uniform(rng.engines[ju]) < std::min(1.0, dt)) {
                a_.noalias() = jumps_[ju] * sig;
                sig.noalias() = a_ * jumps_dag_[ju];
                fired = true;
            }
        }
        if (fired) return true;
        a_.noalias() = m_ * sig;
        next_.noalias() = a_ * m_.adjoint();
        for (const Matrix& lv : complement_) {
            a_.noalias() = lv * sig;
            next_.noalias() += dt * (a_ * lv.adjoint());
        }
        sig = 0.5 * (next_ + next_.adjoint());
        return false;
    }

private:
    void euler_drift(const Matrix& rho) {
        Eigen::Map<const Vector> rv(rho.data(), d_ * d_);
        Eigen::Map<Vector> dv(drift_.data(), d_ * d_);
        dv.noalias() = s_ * rv;
        next_ = rho;
        next_ += config_.dt * drift_;
    }

    // Clips negative eigenvalues; returns false when one was below -positivity_clip.
    bool make_positive(Matrix& rho) {
        llt_.compute(rho);
        if (llt_.info() == Eigen::Success) return true;
        es_.compute(rho);
        const RealVector& ev = es_.eigenvalues();
        const bool valid = ev.minCoeff() >= -config_.positivity_clip;
        rho = es_.eigenvectors() * ev.cwiseMax(0.0).cast<cplx>().asDiagonal() * es_.eigenvectors().adjoint();
        return valid;
    }

    const MeasurementSetup& setup_;
    const TrajectoryConfig& config_;
    Index d_, l_;
    const Matrix& s_;
    double sqrt_dt_;
    std::vector<Matrix> jumps_, jumps_dag_;
    std::vector<Matrix> complement_;
    Matrix g_dt_, m_;
    Matrix next_, drift_, a_, b_;
    Eigen::LLT<Matrix> llt_;
    Eigen::SelfAdjointEigenSolver<Matrix> es_;
};

constexpr int kMaxAttempts = 16;

template <typename Fn>
void parallel_paths(Index n, int threads, Fn&& fn) {
    const auto nt = static_cast<Index>(std::max(1, threads));
    if (nt == 1 || n < 2) {
        for (Index i = 0; i < n; ++i) fn(i);
        return;
    }
    std::vector<std::exception_ptr> errors(static_cast<std::size_t>(nt));
    std::vector<std::thread> pool;
    for (Index t = 0; t < nt; ++t)
        pool.emplace_back([&, t] {
            try {
                for (Index i = t; i < n; i += nt) fn(i);
            } catch (...) {
                errors[static_cast<std::size_t>(t)] = std::current_exception();
            }
        });
    for (auto& th : pool) th.join();
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
}

void check_inputs(const MeasurementSetup& setup, const DensityOperator& rho0, const TrajectoryConfig& config) {
    config.validate();
    if (rho0.dim() != setup.dim()) throw DimensionMismatch("initial state dimension differs from the model", "rho0");
}

}  // namespace

PathRecord simulate_path(const MeasurementSetup& setup, const DensityOperator& rho0, const TrajectoryConfig& config,
                         const std::vector<double>& checkpoints, Index path_index) {
    check_inputs(setup, rho0, config);
    const CheckpointPlan plan = plan_checkpoints(config, checkpoints);
    const Index l = setup.num_channels();
    Stepper stepper(setup, config);

    for (int attempt = 0; attempt < kMaxAttempts; ++attempt) {
        PathRecord rec;
        rec.attempts = attempt + 1;
        rec.estimators.assign(checkpoints.size(), RealVector::Zero(l));
        if (config.store_states) rec.states.assign(checkpoints.size(), Matrix());
        ChannelStreams rng = open_streams(config, l, path_index, attempt, 0);
        Matrix rho = rho0.matrix();
        RealVector integral = RealVector::Zero(l), w = RealVector::Zero(l), counts = RealVector::Zero(l);
        std::size_t next_cp = 0;
        bool ok = true;
        for (Index step = 1; step <= plan.last_step; ++step) {
            if (!stepper.filter_step(rho, rng, integral, w, counts, rec.invalid_steps)) {
                ok = false;
                break;
            }
            ++rec.steps;
            while (next_cp < plan.order.size() && plan.order[next_cp].first == step) {
                const std::size_t idx = plan.order[next_cp].second;
                const double t = static_cast<double>(step) * config.dt;
                RealVector& e = rec.estimators[idx];
                for (Index j = 0; j < l; ++j)
                    e(j) = setup.is_brownian(j) ? (integral(j) + w(j)) / t : counts(j) / t;
                if (config.store_states) rec.states[idx] = rho;
                ++next_cp;
            }
        }
        if (ok) return rec;
    }
    throw NumericalError("path kept hitting degenerate jumps", "path=" + std::to_string(path_index));
}

LinearPathRecord simulate_linear_path(const MeasurementSetup& setup, const DensityOperator& rho0,
                                      const TrajectoryConfig& config, const std::vector<double>& checkpoints,
                                      Index path_index) {
    check_inputs(setup, rho0, config);
    const CheckpointPlan plan = plan_checkpoints(config, checkpoints);
    Stepper stepper(setup, config);
    LinearPathRecord rec;
    rec.z.assign(checkpoints.size(), std::numeric_limits<double>::quiet_NaN());
    ChannelStreams rng = open_streams(config, setup.num_channels(), path_index, 0, 1);
    Matrix sig = rho0.matrix();
    std::size_t next_cp = 0;
    for (Index step = 1; step <= plan.last_step; ++step) {
        const bool fired = stepper.linear_step(sig, rng);
        const double z = sig.trace().real();
        if (!std::isfinite(z) || (z <= 0 && !fired)) {
            rec.failed = true;
            return rec;
        }
        if (z <= 0) {
            // a singular jump annihilated the state; zero is absorbing
            for (; next_cp < plan.order.size(); ++next_cp) rec.z[plan.order[next_cp].second] = 0.0;
            rec.absorbed = true;
            return rec;
        }
        while (next_cp < plan.order.size() && plan.order[next_cp].first == step) {
            rec.z[plan.order[next_cp].second] = z;
            ++next_cp;
        }
    }
    return rec;
}

ConfidenceInterval clopper_pearson(Index successes, Index trials, double confidence) {
    if (trials < 1 || successes < 0 || successes > trials) throw ValidationError("invalid binomial counts");
    const double alpha = 1.0 - confidence;
    const auto k = static_cast<double>(successes), n = static_cast<double>(trials);
    ConfidenceInterval ci;
    ci.lower = successes == 0 ? 0.0 : boost::math::quantile(boost::math::beta_distribution<double>(k, n - k + 1), alpha / 2);
    ci.upper = successes == trials ? 1.0
                                   : boost::math::quantile(boost::math::beta_distribution<double>(k + 1, n - k), 1 - alpha / 2);
    return ci;
}

double EnsembleResult::valid_fraction() const {
    return total_steps == 0 ? 1.0 : 1.0 - static_cast<double>(invalid_steps) / static_cast<double>(total_steps);
}

EnsembleResult run_ensemble(const MeasurementSetup& setup, const DensityOperator& rho0, const TrajectoryConfig& config,
                            const RealVector& r, const std::vector<double>& checkpoints) {
    check_inputs(setup, rho0, config);
    const Index l = setup.num_channels();
    if (r.size() != l) throw DimensionMismatch("thresholds must have one entry per channel", "r");
    for (Index j = 0; j < l; ++j)
        if (std::isnan(r(j)) || r(j) == std::numeric_limits<double>::infinity())
            throw ValidationError("threshold must be a number or -inf", "r[" + std::to_string(j) + "]");
    plan_checkpoints(config, checkpoints);

    EnsembleResult out;
    out.mean = mean_vector(setup);
    double intensity = 0.0;
    for (Index j = setup.num_brownian(); j < l; ++j) intensity = std::max(intensity, std::pow(operator_norm(setup.tilted_jump(j)), 2));
    if (config.dt * intensity >= 0.1)
        out.warnings.push_back("dt times the largest jump intensity is " + std::to_string(config.dt * intensity) +
                               " (>= 0.1); jump thinning bias may be visible");

    out.paths.resize(static_cast<std::size_t>(config.n_paths));
    parallel_paths(config.n_paths, config.threads, [&](Index i) {
        out.paths[static_cast<std::size_t>(i)] = simulate_path(setup, rho0, config, checkpoints, i);
    });

    const auto n = static_cast<double>(config.n_paths);
    const Index d = setup.dim();
    for (std::size_t c = 0; c < checkpoints.size(); ++c) {
        CheckpointSummary sum;
        sum.t = static_cast<double>(config.checkpoint_step(checkpoints[c])) * config.dt;
        RealVector s1 = RealVector::Zero(l), s2 = RealVector::Zero(l);
        Index hits = 0;
        Matrix m1 = Matrix::Zero(d, d);
        RealMatrix m2 = RealMatrix::Zero(d, d);
        for (const PathRecord& p : out.paths) {
            const RealVector& e = p.estimators[c];
            s1 += e;
            s2 += e.cwiseProduct(e);
            bool all = true;
            for (Index j = 0; j < l; ++j)
                if (!(e(j) - out.mean(j) >= r(j))) all = false;
            if (all) ++hits;
            if (config.store_states) {
                m1 += p.states[c];
                m2 += p.states[c].cwiseAbs2();
            }
        }
        sum.estimator_mean = s1 / n;
        RealVector var = (s2 / n - sum.estimator_mean.cwiseProduct(sum.estimator_mean)).cwiseMax(0.0);
        sum.estimator_stderr = (var * (n / std::max(1.0, n - 1)) / n).cwiseSqrt();
        if (config.store_states) {
            sum.mean_state = m1 / n;
            RealMatrix v = (m2 / n - sum.mean_state.cwiseAbs2()).cwiseMax(0.0);
            sum.mean_state_stderr = (v * (n / std::max(1.0, n - 1)) / n).cwiseSqrt();
        }
        sum.tail.t = sum.t;
        sum.tail.r = r;
        sum.tail.exceedances = hits;
        sum.tail.n_paths = config.n_paths;
        sum.tail.estimate = static_cast<double>(hits) / n;
        sum.tail.ci = clopper_pearson(hits, config.n_paths);
        out.checkpoints.push_back(std::move(sum));
    }
    for (const PathRecord& p : out.paths) {
        out.total_steps += p.steps;
        out.invalid_steps += p.invalid_steps;
        if (p.attempts > 1) ++out.resampled_paths;
    }
    return out;
}

LinearEnsembleResult run_linear_ensemble(const MeasurementSetup& setup, const DensityOperator& rho0,
                                         const TrajectoryConfig& config, const std::vector<double>& checkpoints) {
    check_inputs(setup, rho0, config);
    std::vector<LinearPathRecord> paths(static_cast<std::size_t>(config.n_paths));
    parallel_paths(config.n_paths, config.threads, [&](Index i) {
        paths[static_cast<std::size_t>(i)] = simulate_linear_path(setup, rho0, config, checkpoints, i);
    });
    LinearEnsembleResult out;
    for (const auto& p : paths) {
        if (p.failed) ++out.failed_paths;
        if (p.absorbed) ++out.absorbed_paths;
    }
    const double n = static_cast<double>(config.n_paths - out.failed_paths);
    if (n < 1) throw NumericalError("every linear path lost positivity of its trace; reduce dt");
    for (std::size_t c = 0; c < checkpoints.size(); ++c) {
        double s1 = 0, s2 = 0;
        for (const auto& p : paths) {
            if (p.failed) continue;
            s1 += p.z[c];
            s2 += p.z[c] * p.z[c];
        }
        const double mean = s1 / n;
        const double var = std::max(0.0, s2 / n - mean * mean) * n / std::max(1.0, n - 1);
        out.t.push_back(static_cast<double>(config.checkpoint_step(checkpoints[c])) * config.dt);
        out.mean_z.push_back(mean);
        out.stderr_z.push_back(std::sqrt(var / n));
    }
    return out;
}

Comparison compare_with_bound(const EmpiricalTail& tail, const BoundReport& report, double t) {
    Comparison c;
    c.bound = report.bound(t);
    c.consistent = tail.ci.lower <= c.bound;
    c.margin = c.bound - tail.estimate;
    return c;
}

Matrix evolved_state(const GeneratorContext& ctx, const DensityOperator& rho0, double t) {
    if (rho0.dim() != ctx.dim()) throw DimensionMismatch("initial state dimension differs from the model", "rho0");
    Matrix e = (t * ctx.schrodinger.matrix()).exp();
    return unvec(e * vec(rho0.matrix()), ctx.dim());
}

MeanStateCheck check_mean_state(const GeneratorContext& ctx, const DensityOperator& rho0,
                                const CheckpointSummary& summary) {
    if (summary.mean_state.size() == 0) throw ValidationError("ensemble was run without stored states");
    MeanStateCheck out;
    const Matrix exact = evolved_state(ctx, rho0, summary.t);
    out.distance = trace_norm(hermitian_part(summary.mean_state - exact));
    out.tolerance = std::max(5.0 * std::sqrt(static_cast<double>(ctx.dim())) * summary.mean_state_stderr.norm(), 1e-10);
    out.ok = out.distance <= out.tolerance;
    return out;
}

}  // namespace qdev
