#pragma once

#include "nlbem/geometry.hpp"

#include <Eigen/Dense>

#include <functional>
#include <vector>

namespace nlbem {

// Spectral parameter w off [0, inf) with kappa = -i sqrt(w).
struct SpectralParam {
    cplx w;
    cplx sqrt_w;
    cplx kappa;
    bool real_negative = false;

    static SpectralParam make(cplx w);
};

enum LayerMask : unsigned { kLayerS = 1u, kLayerW = 2u, kLayerWt = 4u, kLayerAll = 7u };

// Boundary operators acting on nodal densities. Node weights are uniform, so
// these matrices coincide with their l2 (weight-symmetrized) representations.
struct LayerMatrices {
    Eigen::MatrixXcd S;   // single layer
    Eigen::MatrixXcd W;   // principal value, conj(x - y) kernel
    Eigen::MatrixXcd Wt;  // principal value, (x - y) kernel
};

LayerMatrices assemble_layers(const DiscretizedCurve& curve, cplx w, unsigned mask = kLayerAll);
Eigen::MatrixXcd assemble_S(const DiscretizedCurve& curve, cplx w);
Eigen::MatrixXcd assemble_W(const DiscretizedCurve& curve, cplx w);
Eigen::MatrixXcd assemble_W_tilde(const DiscretizedCurve& curve, cplx w);

// M(w) = [[S, W], [W(conj w)^*, (w/4) S]] as a 2N x 2N matrix; W(conj w)^* = -Wt(w).
Eigen::MatrixXcd weyl_matrix(const LayerMatrices& layers, cplx w);
Eigen::MatrixXcd assemble_M(const DiscretizedCurve& curve, cplx w);

// Real symmetric matrix of a radial kernel k(|x - y|) with the same quadrature
// as S; the rule is tuned for decay rate `kappa`.
Eigen::MatrixXd assemble_radial_kernel(const DiscretizedCurve& curve, cplx kappa,
                                       const std::function<double(double)>& kernel);

// Potential operators from nodal densities to field values at points.
struct PotentialOperators {
    Eigen::MatrixXcd SL;
    Eigen::MatrixXcd WL;   // d/dz of SL
    Eigen::MatrixXcd WLt;  // d/dzbar of SL
};

double distance_to_curve(const DiscretizedCurve& curve, cplx x);

// Targets at least 1e-3 L away from the curve (PointTooClose otherwise).
PotentialOperators potential_operators(const DiscretizedCurve& curve, cplx w, const std::vector<cplx>& points,
                                       unsigned mask = kLayerAll);
// Targets x_j + delta n_j, one per node (delta > 0 exterior, delta < 0 interior).
PotentialOperators offset_potential_operators(const DiscretizedCurve& curve, cplx w, double delta,
                                              unsigned mask = kLayerAll);

struct PotentialField {
    std::vector<cplx> points;
    Eigen::VectorXcd values;  // SL phi1 + WL phi2
    Eigen::VectorXcd dzbar;   // Wt-L phi1 - (w/4) SL phi2
};

PotentialField evaluate_gamma_field(const DiscretizedCurve& curve, cplx w, const Eigen::VectorXcd& phi1,
                                    const Eigen::VectorXcd& phi2, const std::vector<cplx>& points);

// Side::Interior is the bounded domain (trace taken along -n).
enum class Side { Interior, Exterior };

struct OneSidedTraces {
    Eigen::VectorXcd f;
    Eigen::VectorXcd dzbar_f;
    double defect = 0.0;  // relative gap between the last two extrapolants
    double offset = 0.0;  // largest normal offset used
};

OneSidedTraces one_sided_traces(const DiscretizedCurve& curve, cplx w, const Eigen::VectorXcd& phi1,
                                const Eigen::VectorXcd& phi2, Side side);

enum class SchurKernel { K0Modulus, K1RemainderModulus };

struct SchurResult {
    double discrete_norm = 0.0;
    double analytic_bound = 0.0;
    double c_zeta = 0.0;
    bool holds = false;
};

// Checks ||A|| <= 2/C int_0^{C L/2} alpha for the modulus kernel of S (or of W minus
// its static part).
SchurResult schur_bound_check(const DiscretizedCurve& curve, SchurKernel kernel, cplx w);
// Generic form: kernel(r) on the curve with the decreasing majorant alpha.
SchurResult schur_bound_check(const DiscretizedCurve& curve, cplx kappa_hint,
                              const std::function<double(double)>& kernel, const std::function<double(double)>& alpha);
// Potential variant (theta = 1/2) for |K0| / (2 pi) from the curve to a square grid
// of half-width `half_width` and `grid_n`^2 points.
SchurResult potential_schur_check(const DiscretizedCurve& curve, cplx w, double half_width, int grid_n);

// Integral of a decreasing majorant over (0, a]; throws MajorantNotIntegrable.
double integrate_majorant(const std::function<double(double)>& alpha, double a);

// Trigonometric cardinal function l_0 on N equispaced nodes of period L.
double trig_cardinal(int n, double period, double s);

}  // namespace nlbem
