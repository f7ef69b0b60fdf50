#pragma once

#include "nlbem/free_resolvent.hpp"
#include "nlbem/interactions.hpp"
#include "nlbem/layer_operators.hpp"

#include <Eigen/Dense>

#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <tuple>
#include <vector>

namespace nlbem {

// Shares Weyl matrices between interaction specs on one curve, keyed by (w, blocks).
class WeylCache {
public:
    bool find(cplx w, unsigned blocks, Eigen::MatrixXcd& out) const;
    void store(cplx w, unsigned blocks, const Eigen::MatrixXcd& m);

private:
    mutable std::mutex mutex_;
    std::map<std::tuple<double, double, unsigned>, Eigen::MatrixXcd> entries_;
};

struct BSSample {
    double w = 0.0;
    double indicator = 0.0;          // smallest singular value of I + B2 M(w) B1
    int negative_count = 0;          // inertia of the hermitian pencil, see BirmanSchwinger
    std::vector<double> mu_values;   // decreasing; only for B >= 0
};

// Birman-Schwinger data for one (curve, spec) pair. B is also kept in its range
// decomposition B = U diag(lambda) U*, which gives the hermitian pencil
// H(w) = diag(1/lambda) + U* M(w) U. For real w < 0, I + B2 M B1 is singular
// exactly when H(w) is, and the eigenvalues of H are nondecreasing in w, so the
// number of eigenvalues of T_B in (a, b) is n_neg(H(a)) - n_neg(H(b)).
class BirmanSchwinger {
public:
    BirmanSchwinger(const DiscretizedCurve& curve, const InteractionSpec& spec, FactorMode mode = FactorMode::Rank,
                    std::shared_ptr<WeylCache> cache = nullptr);

    // M(w) with only the blocks that B touches (the others are left zero).
    Eigen::MatrixXcd weyl(cplx w) const;
    Eigen::MatrixXcd system(const Eigen::MatrixXcd& m) const;  // I + B2 M B1
    Eigen::MatrixXcd pencil(const Eigen::MatrixXcd& m) const;  // H(w)
    Eigen::VectorXd pencil_eigenvalues(double w) const;
    BSSample sample(double w, int mu_count = 0) const;

    const DiscretizedCurve& curve() const { return curve_; }
    const Factorization& factorization() const { return fact_; }
    const Eigen::MatrixXcd& B() const { return b_; }
    bool positive() const { return positive_; }
    int rank() const { return static_cast<int>(lambda_.size()); }

private:
    DiscretizedCurve curve_;
    Factorization fact_;
    Eigen::MatrixXcd b_;
    Eigen::MatrixXcd u_;
    Eigen::VectorXd lambda_;
    bool positive_ = false;
    bool block_[2] = {false, false};
    std::shared_ptr<WeylCache> cache_;
};

BSSample bs_indicator(const DiscretizedCurve& curve, const InteractionSpec& spec, double w,
                      FactorMode mode = FactorMode::Rank, int mu_count = 0);

struct ScanOptions {
    double w_min = -50.0;
    double w_max = -1e-4;
    int points = 128;
    double rel_tol = 1e-10;
    FactorMode mode = FactorMode::Rank;
    int mu_count = 0;               // > 0 tracks the roots of f_k = 1/sqrt|w| - mu_k (needs B >= 0)
    bool compute_residuals = true;
    std::shared_ptr<WeylCache> cache;
};

struct EigenResult {
    double w_star = 0.0;
    int multiplicity = 1;
    Eigen::VectorXcd null_vector;   // in K
    Eigen::VectorXcd phi;           // B1 psi as nodal values [phi1; phi2]
    double residual_bs = 0.0;
    double residual_pde = 0.0;
    double residual_tc = 0.0;
};

struct TrackedRoot {
    int k = 0;          // 1-based index of mu_k
    double w = 0.0;     // root of f_k; NaN when f_k keeps its sign on the range
    bool found = false;
};

struct EigenSearch {
    std::vector<BSSample> scan;
    std::vector<EigenResult> eigenvalues;  // increasing w
    std::vector<TrackedRoot> tracked;
    std::vector<std::string> warnings;     // NoBracket, RootAtRangeBoundary, residual failures
};

EigenSearch find_eigenvalues(const DiscretizedCurve& curve, const InteractionSpec& spec, const ScanOptions& options);

// Number of eigenvalues of T_B in (w_lo, w_hi) counted with multiplicity by inertia.
int count_eigenvalues(const DiscretizedCurve& curve, const InteractionSpec& spec, double w_lo, double w_hi);

struct Residuals {
    double pde = 0.0;
    double tc = 0.0;
};
// Residuals of f = gamma(w) phi (phi nodal) for the transmission problem with B.
Residuals eigenfunction_residuals(const DiscretizedCurve& curve, const Eigen::MatrixXcd& B, double w,
                                  const Eigen::VectorXcd& phi);

// Default scan floor -max(50, 4 ||B11||^2, 256 / b22^2), b22 the smallest positive
// eigenvalue of B22, capped at -4e6. Covers the -b^2/4 and -64/b^2 regimes.
double default_scan_floor(const DiscretizedCurve& curve, const InteractionSpec& spec);

// gamma(w) psi with psi nodal [psi1; psi2].
struct LayerTerm {
    cplx w;
    Eigen::VectorXcd density;
};

// A field represented as a smooth part sampled on the grid plus layer potentials,
// which are evaluated pointwise so the kinks along the curve cost no accuracy.
struct KreinResult {
    Eigen::MatrixXcd u;       // smooth + sum of layers on the grid, zero where masked
    Eigen::MatrixXcd smooth;  // grid part, (-Delta - w)^{-1} of the smooth input
    std::vector<LayerTerm> layers;
    Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic> valid;  // false within 1e-3 L of the curve
    Eigen::VectorXcd phi;     // Krein correction density: u contains -gamma(w) phi
    double indicator = 0.0;
};

struct KreinOptions {
    FactorMode mode = FactorMode::Rank;
    // Skips the edge and resolution checks of the grid convolution.
    bool relaxed_resolution = false;
};

// (T_B - w)^{-1} on grid data. Construction assembles the Birman-Schwinger
// system and the layer potentials from the curve to the unmasked grid points,
// so repeated applications only cost two FFT convolutions.
class KreinResolvent {
public:
    KreinResolvent(const DiscretizedCurve& curve, const InteractionSpec& spec, cplx w, const Grid2D& grid,
                   const KreinOptions& options = {});

    // rhs sampled on the grid (smooth, negligible at the edge).
    KreinResult apply(const Eigen::MatrixXcd& rhs) const;
    // A represented field, e.g. an earlier result. Layer parts go through
    // (-Delta - w)^{-1} gamma(v) = (gamma(w) - gamma(v)) / (w - v) and, on traces,
    // gamma(conj w)^* gamma(v) = (M(w) - M(v)) / (w - v).
    KreinResult apply(const KreinResult& field) const;

    double indicator() const { return indicator_; }
    cplx w() const { return w_; }
    const Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic>& valid() const { return valid_; }

private:
    KreinResult run(const Eigen::MatrixXcd& smooth, const std::vector<LayerTerm>& layers) const;

    DiscretizedCurve curve_;
    cplx w_;
    Grid2D grid_;
    KreinOptions options_;
    Factorization fact_;
    Eigen::FullPivLU<Eigen::MatrixXcd> lu_;
    double indicator_ = 0.0;
    FreeResolvent free_;
    Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic> valid_;
    std::vector<cplx> points_;
    std::vector<std::pair<int, int>> where_;
    PotentialOperators potentials_;
};

KreinResult krein_apply(const DiscretizedCurve& curve, const InteractionSpec& spec, cplx w, const Grid2D& grid,
                        const Eigen::MatrixXcd& rhs, const KreinOptions& options = {});

// Grid points at least 1e-3 L from the curve.
Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic> grid_mask(const DiscretizedCurve& curve, const Grid2D& grid);

// <u, g> for smooth g: the grid part by the trapezoid rule and each layer through
// <gamma(v) psi, g> = <psi, gamma(v)^* g> on the curve.
cplx krein_inner_product(const DiscretizedCurve& curve, const KreinResult& u, const Grid2D& grid,
                         const Eigen::MatrixXcd& g);

struct SAsymptoticRow {
    double w = 0.0;
    std::vector<double> density_errors;  // ||sqrt|w| S phi - phi/2|| / ||phi||
    double scaled_norm = 0.0;            // ||sqrt|w| S||
    double compact_error = 0.0;          // ||sqrt|w| S K - K/2||
};

// Densities are nodal vectors; K is an N x N matrix (nodal = l2 for uniform weights).
std::vector<SAsymptoticRow> asymptotic_study_S(const DiscretizedCurve& curve,
                                               const std::vector<Eigen::VectorXcd>& densities,
                                               const Eigen::MatrixXcd& K, const std::vector<double>& w_list);

struct WAsymptoticRow {
    double w = 0.0;
    double norm_W = 0.0;
    double scaled = 0.0;  // |w|^{-tau} ||W||
};

std::vector<WAsymptoticRow> asymptotic_study_W(const DiscretizedCurve& curve, double tau,
                                               const std::vector<double>& w_list);

// Least-squares slope of log y against log x, with the coefficient of determination.
struct LogFit {
    double slope = 0.0;
    double intercept = 0.0;
    double r2 = 0.0;
};
LogFit loglog_fit(const std::vector<double>& x, const std::vector<double>& y);

std::vector<double> log_spaced(double a, double b, int count);

}  // namespace nlbem
