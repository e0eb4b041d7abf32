// deviation.hpp - tilted generators, scaled cumulant generating function, deviation bounds and rate functions.
#pragma once

#include <cstdint>
#include <vector>

#include "qdev/lindblad.hpp"

namespace qdev {

// Channel j uses L_{u_j} = sum_i u_{j,i} L_i. The first q channels are Brownian, the rest Poisson.
class MeasurementSetup {
public:
    MeasurementSetup(GeneratorContext ctx, std::vector<RealVector> directions, Index q);

    const GeneratorContext& context() const { return ctx_; }
    const FaithfulState& sigma() const { return ctx_.sigma(); }
    Index dim() const { return ctx_.dim(); }
    Index num_channels() const { return static_cast<Index>(directions_.size()); }
    Index num_brownian() const { return q_; }
    bool is_brownian(Index j) const { return j < q_; }
    const std::vector<RealVector>& directions() const { return directions_; }
    const Matrix& tilted_jump(Index j) const { return tilted_.at(static_cast<std::size_t>(j)); }

private:
    GeneratorContext ctx_;
    std::vector<RealVector> directions_;
    Index q_;
    std::vector<Matrix> tilted_;
};

RealVector mean_vector(const MeasurementSetup& setup);
RealVector f_statistics(const MeasurementSetup& setup, const Matrix& x);
SuperOperator perturbed_generator(const MeasurementSetup& setup, const RealVector& lambda);

struct ScgfValue {
    double value = 0.0;
    RealVector gradient;
    double gap = 0.0;  // distance between the two largest eigenvalues
    Matrix top;        // top eigenvector as an operator with unit KMS norm
};

// Precomputes the KMS-conjugated pieces so each evaluation is one Hermitian eigensolve.
class ScgfEvaluator {
public:
    explicit ScgfEvaluator(const MeasurementSetup& setup);
    ScgfValue operator()(const RealVector& lambda) const;
    double value(const RealVector& lambda) const;

private:
    Matrix assemble(const RealVector& lambda) const;

    const MeasurementSetup* setup_;
    Matrix base_;
    std::vector<Matrix> pieces_;  // Hermitian parts of the conjugated channel pieces
    Matrix gamma_inv_half_;
};

double scgf(const MeasurementSetup& setup, const RealVector& lambda);

struct OptimizerOptions {
    double lambda_max = 50.0;
    double poisson_cap = 700.0;
    double brownian_cap = 1e8;
    double tolerance = 1e-12;
    int max_sweeps = 10000;
};

struct BoundReport {
    RealVector r;
    RealVector mean;
    RealVector lambda_star;
    double exponent = 0.0;  // +inf when the supremum diverges
    double prefactor = 1.0;
    double stationarity_residual = 0.0;
    int sweeps = 0;
    bool converged = false;

    double bound(double t) const;
};

// sqrt(Tr[rho sigma^{-1/2} rho sigma^{-1/2}])
double bound_prefactor(const FaithfulState& sigma, const DensityOperator& rho);

BoundReport main_bound(const MeasurementSetup& setup, const DensityOperator& rho, const RealVector& r,
                       const OptimizerOptions& options = {});

// sum_l p_l ln(p_l/q_l) - p_l + q_l, +inf when q_l = 0 < p_l.
double mass_relative_entropy(const RealVector& p, const RealVector& q);

struct RatePoint {
    RealVector s;
    double value = 0.0;
    RealVector lambda;
    bool unbounded = false;
};

struct RateTable {
    std::vector<RatePoint> points;
    bool convex = true;  // discrete convexity along consecutive grid points
};

RateTable rate_function(const MeasurementSetup& setup, const std::vector<RealVector>& grid, int threads = 1,
                        const OptimizerOptions& options = {});

struct CrosscheckOptions {
    int starts = 8;
    std::uint64_t seed = 0x5eed;
    Index dimension_guard = 3;
};

double direct_variational_crosscheck(const MeasurementSetup& setup, const RealVector& r,
                                     const CrosscheckOptions& options = {});

}  // namespace qdev
