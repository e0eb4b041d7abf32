// lindblad.hpp - GKSL generators, stationary states and detailed-balance tests.
#pragma once

#include <optional>
#include <vector>

#include "qdev/spectral.hpp"

namespace qdev {

class Lindbladian {
public:
    Lindbladian(const Matrix& hamiltonian, std::vector<Matrix> jumps);

    Index dim() const { return h_.rows(); }
    Index num_jumps() const { return static_cast<Index>(jumps_.size()); }
    const Matrix& hamiltonian() const { return h_; }
    const std::vector<Matrix>& jumps() const { return jumps_; }
    const Matrix& jump(Index j) const { return jumps_.at(static_cast<std::size_t>(j)); }
    // sum_j L_j^* L_j
    const Matrix& jump_norm_sum() const { return k_; }

private:
    Matrix h_;
    std::vector<Matrix> jumps_;
    Matrix k_;
};

// L(X) = i[H,X] + sum_j L_j^* X L_j - 1/2 {sum_j L_j^* L_j, X}
Matrix apply_generator(const Lindbladian& l, const Matrix& x);
// Hilbert-Schmidt adjoint: -i[H,rho] + sum_j L_j rho L_j^* - 1/2 {sum_j L_j^* L_j, rho}
Matrix apply_adjoint_generator(const Lindbladian& l, const Matrix& rho);

SuperOperator heisenberg_superoperator(const Lindbladian& l);
SuperOperator schrodinger_superoperator(const Lindbladian& l);

class GeneratorContext {
public:
    Lindbladian lindbladian;
    DensityOperator state;  // stationary state, possibly not faithful
    SuperOperator heisenberg;
    SuperOperator schrodinger;
    Index kernel_dim = 1;
    bool primitive = false;
    std::optional<std::vector<double>> bohr;

    GeneratorContext(Lindbladian l, DensityOperator st, std::optional<FaithfulState> faithful, SuperOperator heis,
                     SuperOperator schr, Index kernel_dimension);

    Index dim() const { return lindbladian.dim(); }
    bool faithful() const { return faithful_.has_value(); }
    // Throws NotFaithfulError when the stationary state is not full rank.
    const FaithfulState& sigma() const;

private:
    std::optional<FaithfulState> faithful_;
};

GeneratorContext stationary_state(const Lindbladian& l);

SuperOperator dual_superoperator(InnerProductKind kind, const FaithfulState& sigma, const SuperOperator& s);
SuperOperator dual_superoperator(InnerProductKind kind, const GeneratorContext& ctx, const SuperOperator& s);

struct DetailedBalance {
    bool symmetric;
    double deviation;
};

DetailedBalance check_detailed_balance(InnerProductKind kind, const GeneratorContext& ctx);
DetailedBalance check_detailed_balance(InnerProductKind kind, const FaithfulState& sigma, const SuperOperator& s);

std::optional<std::vector<double>> bohr_frequencies(const FaithfulState& sigma, const std::vector<Matrix>& jumps);
std::optional<std::vector<double>> bohr_frequencies(const GeneratorContext& ctx);

// Residual max_j ||sigma^{1/2} L_j^* sigma^{-1/2} - L_j||_max.
double kms_alignment_residual(const FaithfulState& sigma, const std::vector<Matrix>& jumps);
Matrix kms_canonical_hamiltonian(const FaithfulState& sigma, const std::vector<Matrix>& jumps);
Matrix kms_canonical_hamiltonian(const GeneratorContext& ctx);

// -1/2 (<X, L X>_KMS + <L X, X>_KMS)
double dirichlet_form(const GeneratorContext& ctx, const Matrix& x);
double fisher_information(const GeneratorContext& ctx, const Matrix& rho);

bool gauge_equivalence_check(const Lindbladian& l1, const Lindbladian& l2, double tol = 1e-9);

}  // namespace qdev
