#pragma once

#include <complex>
#include <vector>

namespace nlbem {

using cplx = std::complex<double>;

// Square root with Im > 0 on C \ [0, inf). Every module takes sqrt(w) from here.
cplx sqrt_im_positive(cplx w);

// kappa = -i sqrt(w); Re kappa > 0 whenever w is off [0, inf).
cplx kappa_of(cplx w);

struct BesselK01 {
    cplx k0;
    cplx k1;
};

// K_0, K_1 for t off (-inf, 0]. Throws DomainError on the cut; values underflow
// to zero once Re t > 700 (see bessel_k_underflows).
cplx bessel_k(int order, cplx t);
BesselK01 bessel_k01(cplx t);

// e^t K_nu(t); never underflows.
cplx bessel_k_scaled(int order, cplx t);
BesselK01 bessel_k01_scaled(cplx t);

bool bessel_k_underflows(cplx t);

// Modified Bessel I_0, I_1 for complex t (any t); used by oracles and the
// analytic continuation across the imaginary axis.
cplx bessel_i(int order, cplx t);

// K_1(t) = 1/t + t g1(t^2) ln t + t g2(t^2).
struct K1Split {
    cplx singular;
    cplx regular;
};
K1Split bessel_k1_splitting(cplx t);
cplx k1_g1(cplx s);
cplx k1_g2(cplx s);

// I_n(x) = i_n e^{exponent}, K_n(x) = k_n e^{-exponent}; exponent is 0 for
// x <= 700 and x otherwise.
struct RealBesselIK {
    double i_n;
    double k_n;
    double exponent;
};
RealBesselIK bessel_ik_real(int n, double x);

// I_n(x) K_n(x) without overflow, any x > 0.
double bessel_ik_product(int n, double x);

// Constants of the bounds |K_0(t)| <= c0 |t|^{-1/4} e^{-Re t} (|t| >= 1 part)
// and |K_1^{(j)}(t)| <= c2 (|t|^{-1/2} + (1-j)|t|^{-1} + j|t|^{-2}) e^{-Re t},
// fitted as maxima over a polar grid in the right half plane.
struct BesselBoundConstants {
    double kappa1_tilde;
    double kappa2;
};
BesselBoundConstants fit_bessel_bound_constants(int radial_points, int angular_points);

// Gauss-Legendre rule on [-1, 1].
struct GaussRule {
    std::vector<double> x;
    std::vector<double> w;
};
const GaussRule& gauss_legendre(int n);

}  // namespace nlbem
