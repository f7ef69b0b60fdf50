#pragma once

#include "nlbem/free_resolvent.hpp"
#include "nlbem/interactions.hpp"
#include "nlbem/layer_operators.hpp"
#include "nlbem/spectral_solver.hpp"

#include <Eigen/Dense>

#include <vector>

namespace nlbem {

// Dirac operator -i c sigma.grad + (c^2/2) sigma_3 with the non-local shell
// interaction c |F delta><G delta|. F and G hold one 2x2 matrix per node.
//
// With `rescaled` set the model is D^c_{F_c, G_c} with F_c = S_c F, G_c = S_c G,
// S_c = diag(c^{-1/2}, c^{1/2}), and every spectral argument w is measured from
// the rest energy: the operator is evaluated at z = w + c^2/2.
struct DiracModel {
    std::vector<Eigen::Matrix2cd> F, G;
    double c = 1.0;
    bool rescaled = false;
};

// Throws InvalidArgument on size or c problems and SymmetryViolation unless
// Pi*_F Pi_G = Pi*_G Pi_F.
void validate_dirac_model(const DiscretizedCurve& curve, const DiracModel& model);

// Scalar factors of every block, already carrying 1/sqrt(c) and S_c. For the
// plain model:
//   potential P(w) = Phi^c(z) / sqrt(c),  boundary C^c(z),
//   free resolvent (1/c)[a+ u1 - 2i dz u2, -2i dzbar u1 + a- u2], a+- = z/c +- c/2,
// with layer operators at lambda = z^2/c^2 - c^2/4. The rescaled model uses
// P(w) = Phi^c(z) S_c / sqrt(c), N_c(w) = S_c C^c(z) S_c and lambda = w + w^2/c^2.
struct DiracCoefficients {
    cplx lambda;
    cplx pot_s1, pot_w, pot_wt, pot_s2;    // [[s1 SL, w WL], [wt WLt, s2 SL]]
    cplx bnd_s1, bnd_w, bnd_wt, bnd_s2;    // [[s1 S, w W], [wt Wt, s2 S]]
    cplx free_u1, free_dz, free_dzbar, free_u2;
    double trace1 = 1.0, trace2 = 1.0;     // data for Pi_G: (trace1 g1, trace2 g2), g = trace of the free output
};

DiracCoefficients dirac_coefficients(const DiracModel& model, cplx w);

struct DiracLayerSet {
    DiracCoefficients coef;
    LayerMatrices layers;  // S, W, Wt at coef.lambda
    Eigen::MatrixXcd C;    // C^c(z), or N_c(w) for the rescaled model, 2N x 2N
};

DiracLayerSet assemble_dirac_boundary(const DiscretizedCurve& curve, const DiracModel& model, cplx w);

// P(w) from nodal densities [psi1; psi2] to field values at points, rows [upper; lower].
Eigen::MatrixXcd dirac_potential(const DiscretizedCurve& curve, const DiracModel& model, cplx w,
                                 const std::vector<cplx>& points);

// I + Pi_G C Pi*_F (2 x 2); singular exactly at eigenvalues.
Eigen::Matrix2cd dirac_system(const DiscretizedCurve& curve, const DiracModel& model, cplx w);
cplx dirac_determinant(const DiscretizedCurve& curve, const DiracModel& model, cplx w);

// |d_x det + i d_y det| / |d_x det| by central differences; zero for a holomorphic det.
double dirac_holomorphy_defect(const DiscretizedCurve& curve, const DiracModel& model, cplx w, double step = 1e-4);

// Kernel of (D^c_0 - z)^{-1} at x != y:
//   (1/c)(1/2pi)[sqrt(lambda) K1(kappa r) sigma.(x-y)/r + K0(kappa r)(z/c + (c/2) sigma_3)].
Eigen::Matrix2cd free_dirac_kernel(double c, cplx z, cplx x, cplx y);

// (D^c_0 - z)^{-1} applied to the Gaussian (exp(-|x - x0|^2 / 2 sigma^2), 0) at a
// point, from the radial Hankel-transform reference.
Eigen::Vector2cd free_dirac_gaussian_reference(double c, cplx z, double sigma, cplx x0, cplx x);

// Phi-type layer term P(w) density, in the model's own convention.
struct DiracLayerTerm {
    cplx w;
    Eigen::VectorXcd density;
};

struct DiracField {
    Eigen::MatrixXcd u1, u2;           // smooth + layers, zero where masked
    Eigen::MatrixXcd smooth1, smooth2;
    std::vector<DiracLayerTerm> layers;
    Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic> valid;
    Eigen::Matrix2cd system;
};

// (D - z)^{-1} on spinor grid data (z = w, or w + c^2/2 for the rescaled model).
// Construction assembles the 2 x 2 system and the potentials to the unmasked grid
// points; applications then cost four FFT convolutions.
class DiracResolvent {
public:
    DiracResolvent(const DiscretizedCurve& curve, const DiracModel& model, cplx w, const Grid2D& grid,
                   bool relaxed_resolution = false);

    DiracField apply(const Eigen::MatrixXcd& f1, const Eigen::MatrixXcd& f2) const;
    // Represented field input; layer terms go through the gamma-field identities
    // (D0 - z)^{-1} P(v) = (P(w) - P(v)) / (w - v) and, on traces, (C(w) - C(v)) / (w - v).
    DiracField apply(const DiracField& field) const;

    const Eigen::Matrix2cd& system() const { return system_; }

private:
    DiracField run(const Eigen::MatrixXcd& f1, const Eigen::MatrixXcd& f2,
                   const std::vector<DiracLayerTerm>& layers) const;

    DiscretizedCurve curve_;
    DiracModel model_;
    cplx w_;
    Grid2D grid_;
    bool relaxed_;
    DiracLayerSet set_;
    Eigen::MatrixXcd pf_, pg_;  // l2 projections, 2 x 2N
    Eigen::Matrix2cd system_;
    FreeResolvent free_;
    Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic> valid_;
    std::vector<cplx> points_;
    std::vector<std::pair<int, int>> where_;
    Eigen::MatrixXcd potential_;  // 2P x 2N
};

DiracField dirac_resolvent_apply(const DiscretizedCurve& curve, const DiracModel& model, cplx w, const Grid2D& grid,
                                 const Eigen::MatrixXcd& f1, const Eigen::MatrixXcd& f2);

struct NRRow {
    double c = 0.0;
    double discrepancy = 0.0;  // max over the panel of max |Dirac - Schroedinger (x) diag(1,0)| / max |u_S|
    double leakage = 0.0;      // max over the panel of ||lower|| / ||upper||
    double slope_so_far = 0.0; // fit over the rows up to this one (NaN for the first)
};

struct NRStudy {
    std::vector<NRRow> rows;
    LogFit fit;            // discrepancy against c
    LogFit leakage_fit;
};

std::vector<double> default_c_list();

// Gaussians exp(-|x - x_k|^2 / 2 sigma^2) on the grid, one per centre.
std::vector<Eigen::MatrixXcd> gaussian_panel(const Grid2D& grid, const std::vector<cplx>& centres, double sigma);

// Rescaled Dirac resolvent at w + c^2/2 against the Krein resolvent of T_B at w,
// B = Pi*_{VF} Pi_{VG}, on (f, 0) for each panel entry. Throws SlopeFitUnstable
// when the log-log fit has R^2 < 0.9.
NRStudy nr_limit_study(const DiscretizedCurve& curve, const std::vector<Eigen::Matrix2cd>& F,
                       const std::vector<Eigen::Matrix2cd>& G, cplx w, const Grid2D& grid,
                       const std::vector<Eigen::MatrixXcd>& panel, const std::vector<double>& c_list);

struct GapCount {
    int sign_changes = 0;
    int touch_points = 0;        // near-zero local minima of |det| without a sign change (double roots)
    int roots = 0;               // sign_changes + 2 touch_points
    int inertia_count = 0;       // eigenvalues in the scanned window by the pencil inertia
    double max_imag_ratio = 0.0; // max |Im det| / |det| along the scan (zero in exact arithmetic)
    std::vector<double> brackets;  // midpoints of sign changes
    double z_lo = 0.0, z_hi = 0.0;
};

// Roots of det(I + Pi_G C^c(z) Pi*_F) for real z in the gap (-c^2/2, c^2/2) of the
// plain model, sampled at z = (c^2/2) cos(theta) on `samples` midpoints in theta.
// The two z sharing a lambda share their layer matrices.
GapCount dirac_gap_roots(const DiscretizedCurve& curve, const DiracModel& model, int samples = 400);
// Several models with a common c; the layer matrices are assembled once.
std::vector<GapCount> dirac_gap_roots(const DiscretizedCurve& curve, const std::vector<DiracModel>& models,
                                      int samples = 400);

}  // namespace nlbem
