#include "nlbem/special_functions.hpp"

#include "nlbem/errors.hpp"

#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/special_functions/bessel.hpp>

#include <cmath>
#include <map>
#include <mutex>
#include <numbers>

namespace nlbem {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kEuler = std::numbers::egamma;
constexpr double kEps = 1e-17;

// Switch radius between the power series and the continued fraction. Chosen by
// comparing both against the integral representation; at |t| = 2 the series
// loses at most a factor e^4 to cancellation.
constexpr double kSeriesRadius = 2.0;
// Real arguments below this use the Boost rational approximations.
constexpr double kRealFastLimit = 600.0;
constexpr double kUnderflowRe = 700.0;

void check_domain(cplx t) {
    if (t == cplx(0.0, 0.0)) {
        throw Error(ErrorCode::DomainError, "K_nu(t) at t = 0");
    }
    if (t.imag() == 0.0 && t.real() < 0.0) {
        throw Error(ErrorCode::DomainError, "K_nu(t) on the branch cut (-inf, 0]");
    }
}

BesselK01 series_k01(cplx t) {
    const cplx z2 = 0.25 * t * t;
    cplx term0(1.0, 0.0);  // z2^k / (k!)^2
    cplx term1(1.0, 0.0);  // z2^k / (k! (k+1)!)
    cplx i0 = term0, h0sum(0.0, 0.0);
    cplx i1sum = term1;
    double hk = 0.0;
    cplx psisum = (-2.0 * kEuler + 1.0) * term1;  // psi(1) + psi(2) = -2 gamma + 1
    for (int k = 1; k < 200; ++k) {
        const double dk = k;
        term0 *= z2 / (dk * dk);
        term1 *= z2 / (dk * (dk + 1.0));
        hk += 1.0 / dk;
        const double hk1 = hk + 1.0 / (dk + 1.0);
        i0 += term0;
        h0sum += hk * term0;
        i1sum += term1;
        const cplx dpsi = (-2.0 * kEuler + hk + hk1) * term1;
        psisum += dpsi;
        if (std::abs(term0) * (1.0 + hk1) < kEps * std::abs(i0) && std::abs(dpsi) < kEps * std::abs(psisum)) {
            break;
        }
    }
    const cplx lg = std::log(0.5 * t);
    const cplx i1 = 0.5 * t * i1sum;
    BesselK01 r;
    r.k0 = -(lg + kEuler) * i0 + h0sum;
    r.k1 = 1.0 / t + lg * i1 - 0.25 * t * psisum;
    return r;
}

// Steed/Temme continued fraction for e^x K_0(x), e^x K_1(x), valid off the cut.
BesselK01 cf2_k01_scaled(cplx x) {
    cplx b = 2.0 * (1.0 + x);
    cplx d = 1.0 / b;
    cplx h = d, delh = d;
    cplx q1(0.0, 0.0), q2(1.0, 0.0);
    const double a1 = 0.25;
    cplx q(a1, 0.0), c(a1, 0.0);
    double a = -a1;
    cplx s = 1.0 + q * delh;
    for (int i = 2; i < 200000; ++i) {
        a -= 2.0 * (i - 1);
        c = -a * c / static_cast<double>(i);
        const cplx qnew = (q1 - b * q2) / a;
        q1 = q2;
        q2 = qnew;
        q += c * qnew;
        b += 2.0;
        d = 1.0 / (b + a * d);
        delh = (b * d - 1.0) * delh;
        h += delh;
        const cplx dels = q * delh;
        s += dels;
        if (std::abs(dels) < 1e-17 * std::abs(s)) {
            break;
        }
    }
    h = a1 * h;
    BesselK01 r;
    r.k0 = std::sqrt(kPi / (2.0 * x)) / s;
    r.k1 = r.k0 * (x + 0.5 - h) / x;
    return r;
}

bool is_real_positive(cplx t) { return t.imag() == 0.0 && t.real() > 0.0; }

BesselK01 right_half_scaled(cplx t) {
    if (std::abs(t) <= kSeriesRadius) {
        BesselK01 r = series_k01(t);
        const cplx e = std::exp(t);
        return {r.k0 * e, r.k1 * e};
    }
    return cf2_k01_scaled(t);
}

// I_0, I_1 times e^{-z} for Re z >= 0.
void bessel_i01_scaled(cplx z, cplx& i0s, cplx& i1s) {
    const double az = std::abs(z);
    if (az <= 30.0) {
        const cplx z2 = 0.25 * z * z;
        cplx t0(1.0, 0.0), t1(1.0, 0.0), s0 = t0, s1 = t1;
        for (int k = 1; k < 500; ++k) {
            t0 *= z2 / (double(k) * k);
            t1 *= z2 / (double(k) * (k + 1));
            s0 += t0;
            s1 += t1;
            if (std::abs(t0) < kEps * std::abs(s0) && std::abs(t1) < kEps * std::abs(s1)) {
                break;
            }
        }
        const cplx e = std::exp(-z);
        i0s = s0 * e;
        i1s = 0.5 * z * s1 * e;
        return;
    }
    // Hankel expansion with both exponentials.
    auto sums = [&](int nu, cplx& alt, cplx& plain) {
        const double mu = 4.0 * nu * nu;
        cplx term(1.0, 0.0);
        alt = term;
        plain = term;
        for (int k = 1; k < 60; ++k) {
            const double f = (mu - (2.0 * k - 1) * (2.0 * k - 1)) / (8.0 * k);
            const cplx next = term * f / z;
            if (std::abs(next) > std::abs(term)) {
                break;
            }
            term = next;
            alt += (k % 2 ? -1.0 : 1.0) * term;
            plain += term;
            if (std::abs(term) < kEps) {
                break;
            }
        }
    };
    const cplx pref = 1.0 / std::sqrt(2.0 * kPi * z);
    const double sgn = z.imag() >= 0.0 ? 1.0 : -1.0;
    const cplx e2 = std::exp(-2.0 * z);
    cplx a0, p0, a1, p1;
    sums(0, a0, p0);
    sums(1, a1, p1);
    const cplx iu(0.0, sgn);
    i0s = pref * (a0 + iu * e2 * p0);
    i1s = pref * (a1 - iu * e2 * p1);
}

}  // namespace

cplx sqrt_im_positive(cplx w) {
    cplx s = std::sqrt(w);
    if (s.imag() < 0.0 || (s.imag() == 0.0 && w.imag() == 0.0 && w.real() < 0.0)) {
        s = -s;
    }
    return s;
}

cplx kappa_of(cplx w) { return cplx(0.0, -1.0) * sqrt_im_positive(w); }

bool bessel_k_underflows(cplx t) { return t.real() > kUnderflowRe; }

BesselK01 bessel_k01_scaled(cplx t) {
    check_domain(t);
    if (is_real_positive(t) && t.real() < kRealFastLimit) {
        const double x = t.real();
        const double e = std::exp(x);
        return {cplx(boost::math::cyl_bessel_k(0, x) * e, 0.0), cplx(boost::math::cyl_bessel_k(1, x) * e, 0.0)};
    }
    if (t.real() >= 0.0) {
        return right_half_scaled(t);
    }
    // Left half plane: K_nu(zeta e^{+-i pi}) = (-1)^nu K_nu(zeta) -+ i pi I_nu(zeta).
    const cplx zeta = -t;
    const double sgn = t.imag() > 0.0 ? 1.0 : -1.0;
    BesselK01 kz = right_half_scaled(zeta);
    cplx i0s, i1s;
    bessel_i01_scaled(zeta, i0s, i1s);
    // Scaled by e^{t} = e^{-zeta}: K terms pick up e^{-2 zeta}, I terms are already e^{-zeta} I.
    const cplx e2 = std::exp(-2.0 * zeta);
    const cplx ipi(0.0, kPi * sgn);
    BesselK01 r;
    r.k0 = kz.k0 * e2 - ipi * i0s;
    r.k1 = -kz.k1 * e2 - ipi * i1s;
    return r;
}

BesselK01 bessel_k01(cplx t) {
    check_domain(t);
    if (is_real_positive(t) && t.real() < kRealFastLimit) {
        const double x = t.real();
        return {cplx(boost::math::cyl_bessel_k(0, x), 0.0), cplx(boost::math::cyl_bessel_k(1, x), 0.0)};
    }
    if (t.real() >= 0.0 && std::abs(t) <= kSeriesRadius) {
        return series_k01(t);
    }
    if (bessel_k_underflows(t)) {
        return {cplx(0.0, 0.0), cplx(0.0, 0.0)};
    }
    BesselK01 r = bessel_k01_scaled(t);
    const cplx e = std::exp(-t);
    return {r.k0 * e, r.k1 * e};
}

cplx bessel_k(int order, cplx t) {
    if (order != 0 && order != 1) {
        throw Error(ErrorCode::InvalidArgument, "complex K_nu only for nu = 0, 1");
    }
    const BesselK01 r = bessel_k01(t);
    return order == 0 ? r.k0 : r.k1;
}

cplx bessel_k_scaled(int order, cplx t) {
    if (order != 0 && order != 1) {
        throw Error(ErrorCode::InvalidArgument, "complex K_nu only for nu = 0, 1");
    }
    const BesselK01 r = bessel_k01_scaled(t);
    return order == 0 ? r.k0 : r.k1;
}

cplx bessel_i(int order, cplx t) {
    if (order != 0 && order != 1) {
        throw Error(ErrorCode::InvalidArgument, "complex I_nu only for nu = 0, 1");
    }
    const bool flip = t.real() < 0.0;
    const cplx z = flip ? -t : t;
    cplx i0s, i1s;
    bessel_i01_scaled(z, i0s, i1s);
    const cplx e = std::exp(z);
    if (order == 0) {
        return i0s * e;
    }
    return (flip ? -1.0 : 1.0) * i1s * e;
}

cplx k1_g1(cplx s) {
    const cplx q = 0.25 * s;
    cplx term(1.0, 0.0), sum = term;
    for (int k = 1; k < 300; ++k) {
        term *= q / (double(k) * (k + 1));
        sum += term;
        if (std::abs(term) < kEps * std::abs(sum)) {
            break;
        }
    }
    return 0.5 * sum;
}

cplx k1_g2(cplx s) {
    const cplx q = 0.25 * s;
    cplx term(1.0, 0.0);
    cplx psisum = (-2.0 * kEuler + 1.0) * term;
    double hk = 0.0;
    for (int k = 1; k < 300; ++k) {
        term *= q / (double(k) * (k + 1));
        hk += 1.0 / k;
        const cplx d = (-2.0 * kEuler + 2.0 * hk + 1.0 / (k + 1.0)) * term;
        psisum += d;
        if (std::abs(d) < kEps * std::abs(psisum)) {
            break;
        }
    }
    return -std::log(2.0) * k1_g1(s) - 0.25 * psisum;
}

K1Split bessel_k1_splitting(cplx t) {
    check_domain(t);
    if (std::abs(t) > 10.0) {
        throw Error(ErrorCode::SplitRangeError, "K_1 splitting requested for |t| > 10");
    }
    K1Split r;
    r.singular = 1.0 / t;
    if (std::abs(t) <= kSeriesRadius) {
        const cplx s = t * t;
        r.regular = t * k1_g1(s) * std::log(t) + t * k1_g2(s);
    } else {
        r.regular = bessel_k(1, t) - r.singular;
    }
    return r;
}

namespace {

// e^{-x} I_0(x) and e^{-x} I_1(x) for real x > 0.
void real_i01_scaled(double x, double& i0s, double& i1s) {
    if (x <= 20.0) {
        const double z2 = 0.25 * x * x;
        double t0 = 1.0, t1 = 1.0, s0 = 1.0, s1 = 1.0;
        for (int k = 1; k < 400; ++k) {
            t0 *= z2 / (double(k) * k);
            t1 *= z2 / (double(k) * (k + 1));
            s0 += t0;
            s1 += t1;
            if (t0 < kEps * s0 && t1 < kEps * s1) {
                break;
            }
        }
        const double e = std::exp(-x);
        i0s = s0 * e;
        i1s = 0.5 * x * s1 * e;
        return;
    }
    auto asym = [x](int nu) {
        const double mu = 4.0 * nu * nu;
        double term = 1.0, sum = 1.0;
        for (int k = 1; k < 80; ++k) {
            const double next = -term * (mu - (2.0 * k - 1) * (2.0 * k - 1)) / (8.0 * k * x);
            if (std::abs(next) > std::abs(term)) {
                break;
            }
            term = next;
            sum += term;
            if (std::abs(term) < kEps * std::abs(sum)) {
                break;
            }
        }
        return sum / std::sqrt(2.0 * kPi * x);
    };
    i0s = asym(0);
    i1s = asym(1);
}

// e^{-x} I_n(x) by downward recurrence normalized with e^{-x} I_0(x).
double real_in_scaled(int n, double x, double i0s, double i1s) {
    if (n == 0) {
        return i0s;
    }
    if (n == 1) {
        return i1s;
    }
    const int start = 2 * (n + static_cast<int>(x) + static_cast<int>(std::sqrt(40.0 * (n + x))) + 20);
    double bip = 0.0, bi = 1.0, result = 0.0;
    for (int j = start; j > 0; --j) {
        const double bim = bip + (2.0 * j / x) * bi;
        bip = bi;
        bi = bim;
        if (std::abs(bi) > 1e250) {
            result *= 1e-250;
            bi *= 1e-250;
            bip *= 1e-250;
        }
        if (j == n) {
            result = bip;
        }
    }
    return result * (i0s / bi);
}

}  // namespace

RealBesselIK bessel_ik_real(int n, double x) {
    if (n < 0 || !(x > 0.0)) {
        throw Error(ErrorCode::DomainError, "bessel_ik_real needs n >= 0 and x > 0");
    }
    double i0s, i1s;
    real_i01_scaled(x, i0s, i1s);
    const double ins = real_in_scaled(n, x, i0s, i1s);
    const BesselK01 ks = bessel_k01_scaled(cplx(x, 0.0));
    double km = ks.k0.real(), k = ks.k1.real();
    double kns = km;
    if (n == 1) {
        kns = k;
    } else if (n > 1) {
        for (int j = 1; j < n; ++j) {
            const double kp = km + (2.0 * j / x) * k;
            km = k;
            k = kp;
        }
        kns = k;
    }
    RealBesselIK r;
    if (x <= kUnderflowRe) {
        r.i_n = ins * std::exp(x);
        r.k_n = kns * std::exp(-x);
        r.exponent = 0.0;
    } else {
        r.i_n = ins;
        r.k_n = kns;
        r.exponent = x;
    }
    return r;
}

double bessel_ik_product(int n, double x) {
    const RealBesselIK r = bessel_ik_real(n, x);
    return r.i_n * r.k_n;
}

BesselBoundConstants fit_bessel_bound_constants(int radial_points, int angular_points) {
    BesselBoundConstants c{0.0, 0.0};
    const double rmin = 1e-3, rmax = 60.0;
    for (int a = 0; a < angular_points; ++a) {
        const double phi = -0.5 * kPi + kPi * (a + 0.5) / angular_points;
        for (int i = 0; i < radial_points; ++i) {
            const double rho = rmin * std::pow(rmax / rmin, double(i) / (radial_points - 1));
            const cplx t = std::polar(rho, phi);
            const BesselK01 ks = bessel_k01_scaled(t);
            // scaled values carry e^{t}; |e^{t}| = e^{Re t}
            const double k0 = std::abs(ks.k0), k1 = std::abs(ks.k1);
            const double dk1 = std::abs(-ks.k0 - ks.k1 / t);
            c.kappa1_tilde = std::max(c.kappa1_tilde, k0 * std::pow(rho, 0.25));
            c.kappa2 = std::max(c.kappa2, k1 / (std::pow(rho, -0.5) + 1.0 / rho));
            c.kappa2 = std::max(c.kappa2, dk1 / (std::pow(rho, -0.5) + 1.0 / (rho * rho)));
        }
    }
    return c;
}

namespace {

template <int N>
GaussRule make_boost_rule() {
    using G = boost::math::quadrature::gauss<double, N>;
    const auto& ab = G::abscissa();
    const auto& wt = G::weights();
    GaussRule r;
    for (std::size_t i = 0; i < ab.size(); ++i) {
        if (ab[i] == 0.0) {
            r.x.push_back(0.0);
            r.w.push_back(wt[i]);
        } else {
            r.x.push_back(-ab[i]);
            r.w.push_back(wt[i]);
            r.x.push_back(ab[i]);
            r.w.push_back(wt[i]);
        }
    }
    return r;
}

}  // namespace

const GaussRule& gauss_legendre(int n) {
    static std::mutex mu;
    static std::map<int, GaussRule> cache;
    std::lock_guard<std::mutex> lock(mu);
    auto it = cache.find(n);
    if (it != cache.end()) {
        return it->second;
    }
    GaussRule r;
    switch (n) {
        case 7: r = make_boost_rule<7>(); break;
        case 10: r = make_boost_rule<10>(); break;
        case 15: r = make_boost_rule<15>(); break;
        case 20: r = make_boost_rule<20>(); break;
        case 30: r = make_boost_rule<30>(); break;
        default: throw Error(ErrorCode::InvalidArgument, "Gauss-Legendre order not provided");
    }
    return cache.emplace(n, std::move(r)).first->second;
}

}  // namespace nlbem
