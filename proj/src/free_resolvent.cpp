#include "nlbem/free_resolvent.hpp"

#include "nlbem/errors.hpp"

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <fftw3.h>

#include <cmath>
#include <mutex>
#include <numbers>

namespace nlbem {

namespace {

constexpr double kPi = std::numbers::pi;

// fftw planning is not thread safe
std::mutex g_plan_mutex;

// In-place 2D transform of an m x m row-major array; sign -1 forward, +1 inverse (unnormalized).
void fft2(std::vector<cplx>& a, int m, int sign) {
    auto* p = reinterpret_cast<fftw_complex*>(a.data());
    fftw_plan plan;
    {
        std::lock_guard<std::mutex> lock(g_plan_mutex);
        plan = fftw_plan_dft_2d(m, m, p, p, sign < 0 ? FFTW_FORWARD : FFTW_BACKWARD, FFTW_ESTIMATE);
    }
    fftw_execute(plan);
    std::lock_guard<std::mutex> lock(g_plan_mutex);
    fftw_destroy_plan(plan);
}

int signed_index(int q, int m) { return q < m / 2 ? q : q - m; }

}  // namespace

Grid2D Grid2D::centered(double half_width, int n) {
    if (n < 8 || half_width <= 0.0) throw Error(ErrorCode::InvalidArgument, "grid needs n >= 8 and a positive width");
    Grid2D g;
    g.n = n;
    g.h = 2.0 * half_width / (n - 1);
    g.origin = cplx(-half_width, -half_width);
    return g;
}

FreeResolvent::FreeResolvent(const Grid2D& grid, cplx w) : grid_(grid), w_(w), kappa_(kappa_of(w)) {
    if (std::imag(w) == 0.0 && std::real(w) >= 0.0) throw Error(ErrorCode::SpectralParamOnCut, "w on [0, inf)");
    m_ = 4 * grid.n;
    radius_ = std::sqrt(2.0) * grid.h * (grid.n - 1) * (1.0 + 1e-9);
    dk_ = 2.0 * kPi / (m_ * grid.h);
    ghat_.resize(m_, m_);
    for (int a = 0; a < m_; ++a) {
        const double k1 = dk_ * signed_index(a, m_);
        for (int b = 0; b <= a; ++b) {
            const double k2 = dk_ * signed_index(b, m_);
            ghat_(a, b) = kernel_hat(std::hypot(k1, k2));
            ghat_(b, a) = ghat_(a, b);
        }
    }
}

cplx FreeResolvent::kernel_hat(double s) const {
    // int_0^R K0(kappa r) J0(s r) r dr in closed form
    const cplx t = kappa_ * radius_;
    const BesselK01 k = bessel_k01(t);
    const double j0 = std::cyl_bessel_j(0.0, s * radius_);
    const double j1 = std::cyl_bessel_j(1.0, s * radius_);
    return (1.0 + radius_ * s * j1 * k.k0 - t * j0 * k.k1) / (s * s + kappa_ * kappa_);
}

cplx FreeResolvent::symbol(int a, int b, ResolventField field) const {
    const bool nyquist = a == m_ / 2 || b == m_ / 2;
    const double k1 = dk_ * signed_index(a, m_);
    const double k2 = dk_ * signed_index(b, m_);
    const cplx i(0.0, 1.0);
    switch (field) {
        case kFieldU: return 1.0;
        case kFieldDx: return nyquist ? 0.0 : i * k1;
        case kFieldDy: return nyquist ? 0.0 : i * k2;
        case kFieldDz: return nyquist ? 0.0 : 0.5 * (i * k1 + k2);
        case kFieldDzbar: return nyquist ? 0.0 : 0.5 * (i * k1 - k2);
    }
    throw Error(ErrorCode::InvalidArgument, "unknown field");
}

FreeResolvent::Spectrum FreeResolvent::transform(const Eigen::MatrixXcd& f, bool checked) const {
    const int n = grid_.n;
    if (f.rows() != n || f.cols() != n) throw Error(ErrorCode::InvalidArgument, "data does not match the grid");
    const double peak = f.cwiseAbs().maxCoeff();
    if (!std::isfinite(peak)) throw Error(ErrorCode::InvalidArgument, "non-finite data");
    Spectrum out;
    out.c = Eigen::MatrixXcd::Zero(m_, m_);
    if (peak == 0.0) return out;
    double edge = 0.0;
    for (int k = 0; k < n; ++k) {
        edge = std::max({edge, std::abs(f(0, k)), std::abs(f(n - 1, k)), std::abs(f(k, 0)), std::abs(f(k, n - 1))});
    }
    if (checked && edge > 1e-6 * peak) {
        throw Error(ErrorCode::GridTooCoarse, "data is not negligible at the box edge (" + std::to_string(edge / peak) + ")");
    }

    std::vector<cplx> buf(static_cast<size_t>(m_) * m_, 0.0);
    for (int a = 0; a < n; ++a)
        for (int b = 0; b < n; ++b) buf[static_cast<size_t>(a) * m_ + b] = f(a, b);
    fft2(buf, m_, -1);

    double top = 0.0, tail = 0.0;
    for (int a = 0; a < m_; ++a) {
        for (int b = 0; b < m_; ++b) {
            const double v = std::abs(buf[static_cast<size_t>(a) * m_ + b]);
            top = std::max(top, v);
            if (std::max(std::abs(signed_index(a, m_)), std::abs(signed_index(b, m_))) >= 3 * m_ / 8) tail = std::max(tail, v);
            out.c(a, b) = ghat_(a, b) * buf[static_cast<size_t>(a) * m_ + b];
        }
    }
    if (checked && tail > 1e-6 * top) {
        throw Error(ErrorCode::GridTooCoarse, "data is under-resolved (spectral tail " + std::to_string(tail / top) + ")");
    }
    return out;
}

Eigen::MatrixXcd FreeResolvent::on_grid(const Spectrum& s, ResolventField field) const {
    std::vector<cplx> buf(static_cast<size_t>(m_) * m_);
    for (int a = 0; a < m_; ++a)
        for (int b = 0; b < m_; ++b) buf[static_cast<size_t>(a) * m_ + b] = symbol(a, b, field) * s.c(a, b);
    fft2(buf, m_, +1);
    const int n = grid_.n;
    const double scale = 1.0 / (static_cast<double>(m_) * m_);
    Eigen::MatrixXcd u(n, n);
    for (int a = 0; a < n; ++a)
        for (int b = 0; b < n; ++b) u(a, b) = scale * buf[static_cast<size_t>(a) * m_ + b];
    return u;
}

Eigen::VectorXcd FreeResolvent::at_points(const Spectrum& s, const std::vector<cplx>& points,
                                          ResolventField field) const {
    const double side = grid_.h * (grid_.n - 1);
    Eigen::MatrixXcd c(m_, m_);
    for (int a = 0; a < m_; ++a)
        for (int b = 0; b < m_; ++b) c(a, b) = symbol(a, b, field) * s.c(a, b);
    Eigen::VectorXcd out(static_cast<Eigen::Index>(points.size()));
    Eigen::VectorXcd e1(m_), e2(m_);
    for (size_t p = 0; p < points.size(); ++p) {
        const cplx x = points[p] - grid_.origin;
        if (x.real() < -1e-9 * side || x.imag() < -1e-9 * side || x.real() > side * (1 + 1e-9) ||
            x.imag() > side * (1 + 1e-9)) {
            throw Error(ErrorCode::InvalidArgument, "evaluation point outside the resolvent box");
        }
        for (int q = 0; q < m_; ++q) {
            const double k = dk_ * signed_index(q, m_);
            e1(q) = std::polar(1.0, k * x.real());
            e2(q) = std::polar(1.0, k * x.imag());
        }
        out(static_cast<Eigen::Index>(p)) = (c * e2).cwiseProduct(e1).sum() / (static_cast<double>(m_) * m_);
    }
    return out;
}

RadialValue gaussian_resolvent_reference(cplx w, double sigma, double r) {
    const cplx k2 = -w;
    const double smax = 12.0 / sigma;
    auto part = [&](auto&& f) {
        const auto re = [&](double s) { return std::real(f(s)); };
        const auto im = [&](double s) { return std::imag(f(s)); };
        using GK = boost::math::quadrature::gauss_kronrod<double, 61>;
        return cplx(GK::integrate(re, 0.0, smax, 12, 1e-14), GK::integrate(im, 0.0, smax, 12, 1e-14));
    };
    const double s2 = sigma * sigma;
    RadialValue v;
    v.u = s2 * part([&](double s) {
        return std::exp(-0.5 * s2 * s * s) * std::cyl_bessel_j(0.0, s * r) * s / (s * s + k2);
    });
    v.du_dr = -s2 * part([&](double s) {
        return std::exp(-0.5 * s2 * s * s) * std::cyl_bessel_j(1.0, s * r) * s * s / (s * s + k2);
    });
    return v;
}

}  // namespace nlbem
