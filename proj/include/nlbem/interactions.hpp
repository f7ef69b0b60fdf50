#pragma once

#include "nlbem/geometry.hpp"

#include <Eigen/Dense>

#include <string>
#include <variant>
#include <vector>

namespace nlbem {

// All boundary data lives in the l2 representation of L^2(Sigma; C^2): a vector
// [phi_1 at nodes; phi_2 at nodes] scaled by sqrt(sigma_j). Matrices below act on it.

// B phi = [[alpha, beta], [conj(beta), gamma]] int_Sigma phi.
struct Elementary {
    double alpha = 0.0;
    cplx beta{0.0, 0.0};
    double gamma = 0.0;
};

// sum_n b_n |phi_n><phi_n| with phi_n orthonormal in L^2(Sigma; C^2); phi_n holds
// nodal values (not l2-scaled), length 2N.
struct FiniteRank {
    std::vector<double> b;
    std::vector<Eigen::VectorXcd> phi;
};

// B = diag(eta P_K, 0), P_K the projection onto Fourier modes |n| <= K in arc length.
struct DeltaShellCompact {
    double eta = 0.0;
    int truncation = 16;
};

// B = diag(0, -4 eta P_K).
struct ObliqueType {
    double eta = 0.0;
    int truncation = 16;
};

// Positive semidefinite B with explicit blocks (l2 representation). `b` lists the
// declared positive eigenvalues of B22 when built from a decaying law.
struct ConditionS {
    Eigen::MatrixXcd B11, B12, B22;
    std::vector<double> b;
    std::string law;
    double law_parameter = 0.0;
};

// B = Pi*_{VF} Pi_{VG} with V = diag(1, -2i); F, G are 2x2 matrices per node.
struct DiracInduced {
    std::vector<Eigen::Matrix2cd> F, G;
};

using InteractionSpec = std::variant<Elementary, FiniteRank, DeltaShellCompact, ObliqueType, ConditionS, DiracInduced>;

std::string interaction_name(const InteractionSpec& spec);

// Orthonormal (in L^2(Sigma)) Fourier mode e^{2 pi i n s / L} / sqrt(L) at the nodes.
Eigen::VectorXcd fourier_mode_nodes(const DiscretizedCurve& curve, int n);
// N x (2K+1) l2-orthonormal matrix of modes n = 0, 1, -1, ..., K, -K.
Eigen::MatrixXcd fourier_basis_l2(const DiscretizedCurve& curve, int k);

Eigen::MatrixXcd assemble_B(const InteractionSpec& spec, const DiscretizedCurve& curve);

enum class FactorMode { Sqrt, Rank };

struct Factorization {
    Eigen::MatrixXcd B1;  // K -> boundary space, 2N x k
    Eigen::MatrixXcd B2;  // boundary space -> K, k x 2N
    int dim_K = 0;
    FactorMode mode = FactorMode::Rank;
    // Sqrt mode keeps the eigen-decomposition B = U diag(lambda) U* restricted to
    // the range of B (U is 2N x k); rank mode leaves these empty.
    Eigen::MatrixXcd U;
    Eigen::VectorXd lambda;
};

Factorization factorize(const InteractionSpec& spec, const DiscretizedCurve& curve, FactorMode mode);
// Lowest-dimensional factorization available for the spec.
Factorization default_factorization(const InteractionSpec& spec, const DiscretizedCurve& curve);

// Declared rank when the structure fixes one (-1 when unknown).
int declared_rank(const InteractionSpec& spec, const DiscretizedCurve& curve);

enum class DecayLaw { Geometric, Power };

// B = diag(0, sum_{n=1}^k b_n |psi_n><psi_n|), b_n = q^n or n^{-p}, psi_n the modes 0, 1, -1, 2, ...
ConditionS condition_s_family(DecayLaw law, double parameter, int count, const DiscretizedCurve& curve);
// Asymptote targets w_n = -64 / b_n^2.
std::vector<double> condition_s_targets(const ConditionS& spec);

// Pi_A in the l2 representation: 2 x 2N, (Pi_A f) = int_Sigma A(y)* f(y) dsigma.
Eigen::MatrixXcd dirac_projection(const std::vector<Eigen::Matrix2cd>& A, double h);
// Checks Pi*_F Pi_G = Pi*_G Pi_F to 1e-10 relative; throws SymmetryViolation.
void check_dirac_symmetry(const std::vector<Eigen::Matrix2cd>& F, const std::vector<Eigen::Matrix2cd>& G, double h);
std::vector<Eigen::Matrix2cd> apply_V(const std::vector<Eigen::Matrix2cd>& A);

}  // namespace nlbem
