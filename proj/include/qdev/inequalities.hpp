// inequalities.hpp - functional-inequality constants, Lipschitz calculus and concentration bounds.
#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "qdev/lindblad.hpp"

namespace qdev {

// Smallest eigenvalue of the KMS-symmetrized -L on the complement of the identity.
double spectral_gap(const GeneratorContext& ctx);

enum class EntropyKind { variance, ent2, relative_entropy, entropy_production };

const char* to_string(EntropyKind kind);

// variance, ent2: argument is an observable X. relative_entropy, entropy_production: a state rho.
double entropy_functional(EntropyKind kind, const GeneratorContext& ctx, const Matrix& argument);

// (1 - 2 s_min) / ln(1/s_min - 1), with the limit 1/2 at s_min = 1/2.
double lsi_depolarizing(const FaithfulState& sigma);

double ti_from_lsi(double alpha2);

enum class Provenance { computed, closed_form, user_supplied };

const char* to_string(Provenance p);

struct FunctionalConstants {
    double spectral_gap = 0.0;
    Provenance gap_provenance = Provenance::computed;
    std::optional<double> lsi_alpha2;
    Provenance alpha2_provenance = Provenance::computed;
    std::optional<double> ti_constant;
    Provenance ti_provenance = Provenance::computed;
};

// True when the Heisenberg generator equals X -> Tr[sigma X] id - X.
bool is_depolarizing(const GeneratorContext& ctx, double tol = 1e-10);

// alpha2 comes from the user, else from the closed form when the generator is
// depolarizing. C comes from the user, else from ti_from_lsi. A user alpha2 above
// gap + 1e-9 is rejected.
FunctionalConstants functional_constants(const GeneratorContext& ctx, std::optional<double> user_alpha2 = {},
                                         std::optional<double> user_ti = {});

class LipschitzContext {
public:
    // Derivations default to the generator's jumps.
    explicit LipschitzContext(const GeneratorContext& ctx);
    LipschitzContext(const FaithfulState& sigma, std::vector<Matrix> derivations);

    Index dim() const { return sigma_.dim(); }
    const FaithfulState& sigma() const { return sigma_; }
    const std::vector<Matrix>& derivations() const { return jumps_; }
    const std::vector<double>& bohr() const { return omega_; }
    // e^{-w/2} + e^{w/2}
    double weight(Index j) const;

private:
    FaithfulState sigma_;
    std::vector<Matrix> jumps_;
    std::vector<double> omega_;
};

double lipschitz_norm(const LipschitzContext& lip, const Matrix& x);

// Delta^{1/4}(L_u^*) + Delta^{-1/4}(L_u), L_u = sum_j u_j L_j
Matrix tilde_observable(const GeneratorContext& ctx, const Vector& u);
Matrix tilde_observable(const GeneratorContext& ctx, const RealVector& u);

enum class ConcentrationVariant { ti_gaussian, ti_lipschitz, poincare, depolarizing, tensor, gibbs };

const char* to_string(ConcentrationVariant v);
ConcentrationVariant concentration_variant_from_string(const std::string& s);

struct ConcentrationInputs {
    std::optional<double> prefactor;           // bound_prefactor(sigma, rho); unused by depolarizing and gibbs
    std::optional<double> ti_constant;         // C
    std::optional<double> lipschitz;           // ||O~||_Lip
    std::optional<double> sup_norm;            // ||O~||_inf
    std::optional<double> gap;
    std::optional<double> dim;                 // d for the depolarizing variant
    std::optional<double> pair_sum;            // sum over ordered (x,y) of (O_x - O_y)^2
    std::optional<double> alpha2;
    std::optional<double> alpha_u;
    std::optional<double> n_factors;
    std::optional<double> beta;
    std::optional<double> hamiltonian_norm;
    std::optional<double> ornstein_lipschitz;
    bool ti_hypothesis_attested = false;       // caller vouches for (sqrt(C) O~, sqrt(C) O~) in Phi
};

// bound(t, r) = prefactor * exp(-kappa t r^2)
struct ConcentrationBound {
    ConcentrationVariant variant = ConcentrationVariant::ti_gaussian;
    double prefactor = 1.0;
    double kappa = 0.0;

    double exponent(double t, double r) const;
    double bound(double t, double r) const;
};

ConcentrationBound concentration_bound(ConcentrationVariant variant, const ConcentrationInputs& in);

// Sum over ordered pairs of (O_x - O_y)^2 for the eigenvalues of a Hermitian X.
double eigenvalue_pair_sum(const Matrix& x);

struct InequalityCheck {
    double lhs = 0.0;
    double rhs = 0.0;
    bool holds = false;
};

// ||rho - sigma||_1^2 <= (4/gap) I_L(rho)
InequalityCheck verify_poincare_ti(const GeneratorContext& ctx, const DensityOperator& rho);
// 4 alpha1 D(rho||sigma) <= EP(rho), for spot checks of a user-supplied constant.
InequalityCheck verify_mlsi(const GeneratorContext& ctx, double alpha1, const DensityOperator& rho);

struct W1Options {
    int random_starts = 12;
    int iterations = 300;
    std::uint64_t seed = 0x77a1;
    Index dimension_guard = 16;
};

// Certified lower bound on W_{1,L}: the best feasible ratio Tr[(rho1 - rho2) X] / ||X||_Lip found.
double w1_lower_bound(const LipschitzContext& lip, const DensityOperator& rho1, const DensityOperator& rho2,
                      const W1Options& options = {});

struct LsiBracket {
    double lower = 0.0;
    double upper = 0.0;
    double min_gap = 0.0;
};

LsiBracket tensorization_lsi_bounds(const std::vector<GeneratorContext>& factors);

// 2 |J| max_{k,j} e^{w_{k,j}/2} ||[L_{k,j}, O~_k(u_k)]||_inf^2
double tensor_alpha(const std::vector<GeneratorContext>& factors, const std::vector<RealVector>& u);

}  // namespace qdev
