// models.hpp - model generators: depolarizing, classical chains, tensor products, heat baths and the qubit channel fixtures.
#pragma once

#include <vector>

#include "qdev/lindblad.hpp"

namespace qdev::models {

// Jumps sqrt(s_x)|x><y| in sigma's eigenbasis; generator X -> Tr[sigma X] id - X.
Lindbladian depolarizing(const FaithfulState& sigma);

// Matrix units |x><y| (x != y) of the computational basis, used as Lipschitz derivations.
std::vector<Matrix> matrix_unit_derivations(Index dim);

class ClassicalChain {
public:
    explicit ClassicalChain(const RealMatrix& rates);

    Index size() const { return q_.rows(); }
    const RealMatrix& rates() const { return q_; }
    const RealVector& stationary() const { return pi_; }
    bool reversible() const { return reversible_; }
    // Smallest nonzero eigenvalue of -Q (reversible chains only).
    double spectral_gap() const;
    // -sum_ij pi_i g_i Q_ij g_j
    double dirichlet_form(const RealVector& g) const;

private:
    RealMatrix q_;
    RealVector pi_;
    bool reversible_ = false;
};

// dephasing < 0 selects kappa = 2 max_i q_i, which makes the quantum gap equal the classical one.
Lindbladian classical_embedding(const ClassicalChain& chain, double dephasing = -1.0);

Lindbladian tensor_product(const std::vector<Lindbladian>& factors, Index dimension_guard = 64);

// Embed an operator acting on the listed sites into the full register of n_sites qudits.
Matrix embed(const Matrix& op, const std::vector<int>& support, int n_sites, Index local_dim);
// Partial trace over one site of an n_sites register.
Matrix partial_trace_site(const Matrix& rho, int site, int n_sites, Index local_dim);
// Inverse companion of partial_trace_site: rho_rest (x) id on `site`.
Matrix tensor_identity_at(const Matrix& rho_rest, int site, int n_sites, Index local_dim);

struct LocalTerm {
    std::vector<int> support;
    Matrix h;
};

struct CommutingHamiltonian {
    int n_sites = 1;
    Index local_dim = 2;
    std::vector<LocalTerm> terms;
    double beta = 0.0;
    int r_max = 2;

    Matrix total() const;
    void validate() const;
};

// Heisenberg-picture channels (unital CP maps) expressed as superoperators.
std::vector<Matrix> kraus_operators(const SuperOperator& channel, double tol = 1e-12);
// Choi matrix eigenvalues of a Heisenberg-picture map (ascending).
RealVector choi_eigenvalues(const SuperOperator& channel);
// Psi - id written in GKSL form with the Kraus operators of Psi as jumps.
Lindbladian channel_generator(const SuperOperator& channel);

struct HeatBath {
    Lindbladian generator;
    Matrix gibbs;
    std::vector<SuperOperator> channels;  // Psi_v, Heisenberg picture
};

HeatBath heat_bath(const CommutingHamiltonian& h, Index dimension_guard = 64);

struct AppendixBParams {
    double theta_u = 0.1;   // u_1 = (cos, sin), u_2 = (-sin, cos)
    double phi_1 = 0.6;     // v_1 = (cos, sin)
    double phi_2 = 1.2;     // v_2 = (cos, sin)
    double p = 0.3;         // p-channel
};

struct AppendixB {
    SuperOperator phi;
    SuperOperator psi;
    SuperOperator psi_tilde;
    SuperOperator p_channel;
    Matrix sigma_phi;
    Matrix p_sigma;
    double a = 0.0;
    double b = 0.0;
};

AppendixB appendix_b_fixtures(const AppendixBParams& params = {});

}  // namespace qdev::models
