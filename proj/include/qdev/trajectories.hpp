// trajectories.hpp - quantum-trajectory Monte Carlo, estimators and empirical tails.
#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "qdev/deviation.hpp"

namespace qdev {

struct TrajectoryConfig {
    double dt = 1e-3;
    double t_max = 1.0;
    Index n_paths = 1000;
    std::uint64_t base_seed = 0;
    double positivity_clip = 1e-10;
    int threads = 1;
    bool store_states = false;

    Index steps() const;
    // Step index of a checkpoint time; rejects t <= 0 and t beyond the horizon.
    Index checkpoint_step(double t) const;
    void validate() const;
};

struct PathRecord {
    std::vector<RealVector> estimators;  // per checkpoint, one entry per channel
    std::vector<Matrix> states;          // per checkpoint when store_states is set
    long steps = 0;
    long invalid_steps = 0;  // eigenvalue below -positivity_clip before clipping
    int attempts = 1;
};

// Independent engine per (base_seed, path, channel, attempt); domain separates the
// normalized filter (0) from the linear reference-measure equation (1).
std::mt19937_64 make_stream(std::uint64_t base_seed, Index path, Index channel, int attempt, int domain = 0);

PathRecord simulate_path(const MeasurementSetup& setup, const DensityOperator& rho0, const TrajectoryConfig& config,
                         const std::vector<double>& checkpoints, Index path_index);

struct LinearPathRecord {
    std::vector<double> z;  // Tr of the unnormalized state at each checkpoint
    bool failed = false;    // Z <= 0 reached by the continuous part: step too large
    bool absorbed = false;  // a jump sent Z to zero, which is absorbing
};

LinearPathRecord simulate_linear_path(const MeasurementSetup& setup, const DensityOperator& rho0,
                                      const TrajectoryConfig& config, const std::vector<double>& checkpoints,
                                      Index path_index);

struct ConfidenceInterval {
    double lower = 0.0;
    double upper = 1.0;
};

ConfidenceInterval clopper_pearson(Index successes, Index trials, double confidence = 0.99);

struct EmpiricalTail {
    double t = 0.0;
    RealVector r;  // -inf disables a channel
    Index exceedances = 0;
    Index n_paths = 0;
    double estimate = 0.0;
    ConfidenceInterval ci;
};

struct CheckpointSummary {
    double t = 0.0;
    RealVector estimator_mean;
    RealVector estimator_stderr;
    EmpiricalTail tail;
    Matrix mean_state;             // empty unless states were stored
    RealMatrix mean_state_stderr;  // entrywise standard error of the mean
};

struct EnsembleResult {
    std::vector<CheckpointSummary> checkpoints;
    RealVector mean;  // m_u used to centre the estimators
    long total_steps = 0;
    long invalid_steps = 0;
    Index resampled_paths = 0;
    std::vector<std::string> warnings;
    std::vector<PathRecord> paths;

    double valid_fraction() const;
};

EnsembleResult run_ensemble(const MeasurementSetup& setup, const DensityOperator& rho0, const TrajectoryConfig& config,
                            const RealVector& r, const std::vector<double>& checkpoints);

struct LinearEnsembleResult {
    std::vector<double> t;
    std::vector<double> mean_z;
    std::vector<double> stderr_z;
    Index failed_paths = 0;
    Index absorbed_paths = 0;
};

LinearEnsembleResult run_linear_ensemble(const MeasurementSetup& setup, const DensityOperator& rho0,
                                         const TrajectoryConfig& config, const std::vector<double>& checkpoints);

struct Comparison {
    bool consistent = false;
    double bound = 0.0;
    double margin = 0.0;  // bound - point estimate
};

Comparison compare_with_bound(const EmpiricalTail& tail, const BoundReport& report, double t);

// e^{t L*} rho0
Matrix evolved_state(const GeneratorContext& ctx, const DensityOperator& rho0, double t);

struct MeanStateCheck {
    double distance = 0.0;   // trace norm of the deviation
    double tolerance = 0.0;  // 5 sqrt(d) times the Frobenius norm of the entrywise standard error
    bool ok = false;
};

MeanStateCheck check_mean_state(const GeneratorContext& ctx, const DensityOperator& rho0,
                                const CheckpointSummary& summary);

}  // namespace qdev
