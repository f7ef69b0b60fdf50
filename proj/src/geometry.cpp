#include "nlbem/geometry.hpp"

#include "nlbem/errors.hpp"

#include <unsupported/Eigen/FFT>

#include <algorithm>
#include <cmath>
#include <numbers>

namespace nlbem {

namespace detail {
std::shared_ptr<QuadratureCache> make_quadrature_cache();
}

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kTwoPi = 2.0 * std::numbers::pi;

double wrap(double s, double period) {
    double r = std::fmod(s, period);
    if (r < 0.0) {
        r += period;
    }
    return r;
}

// Proper crossing of segments p1p2 and q1q2.
bool segments_cross(cplx p1, cplx p2, cplx q1, cplx q2) {
    auto orient = [](cplx a, cplx b, cplx c) { return ((b - a) * std::conj(c - a)).imag(); };
    const double d1 = orient(q1, q2, p1), d2 = orient(q1, q2, p2);
    const double d3 = orient(p1, p2, q1), d4 = orient(p1, p2, q2);
    return ((d1 > 0) != (d2 > 0)) && ((d3 > 0) != (d4 > 0)) && d1 != 0 && d2 != 0 && d3 != 0 && d4 != 0;
}

}  // namespace

CurveDescriptor CurveDescriptor::circle(double radius) {
    CurveDescriptor d;
    d.kind = CurveKind::Circle;
    d.radius = radius;
    d.label = "circle";
    return d;
}

CurveDescriptor CurveDescriptor::ellipse(double a, double b) {
    CurveDescriptor d;
    d.kind = CurveKind::Ellipse;
    d.a = a;
    d.b = b;
    d.label = "ellipse";
    return d;
}

CurveDescriptor CurveDescriptor::star(double r0, double eps, int lobes) {
    CurveDescriptor d;
    d.kind = CurveKind::Star;
    d.r0 = r0;
    d.eps = eps;
    d.lobes = lobes;
    d.label = "star";
    return d;
}

CurveDescriptor CurveDescriptor::custom(std::function<cplx(double)> position, std::function<cplx(double)> derivative,
                                        double period, std::string label) {
    CurveDescriptor d;
    d.kind = CurveKind::Custom;
    d.position = std::move(position);
    d.derivative = std::move(derivative);
    d.period = period;
    d.label = std::move(label);
    return d;
}

CurveDescriptor CurveDescriptor::trigonometric(std::vector<double> xc, std::vector<double> xs, std::vector<double> yc,
                                               std::vector<double> ys) {
    auto coef = [](const std::vector<double>& v, std::size_t k) { return k < v.size() ? v[k] : 0.0; };
    const std::size_t kmax = std::max({xc.size(), xs.size(), yc.size(), ys.size()});
    auto pos = [=](double th) {
        double x = 0.0, y = 0.0;
        for (std::size_t k = 0; k < kmax; ++k) {
            const double c = std::cos(k * th), s = std::sin(k * th);
            x += coef(xc, k) * c + coef(xs, k) * s;
            y += coef(yc, k) * c + coef(ys, k) * s;
        }
        return cplx(x, y);
    };
    auto der = [=](double th) {
        double x = 0.0, y = 0.0;
        for (std::size_t k = 1; k < kmax; ++k) {
            const double c = std::cos(k * th), s = std::sin(k * th);
            x += k * (-coef(xc, k) * s + coef(xs, k) * c);
            y += k * (-coef(yc, k) * s + coef(ys, k) * c);
        }
        return cplx(x, y);
    };
    return custom(pos, der, kTwoPi, "trigonometric");
}

cplx CurveDescriptor::zeta(double th) const {
    switch (kind) {
        case CurveKind::Circle: return std::polar(radius, th);
        case CurveKind::Ellipse: return {a * std::cos(th), b * std::sin(th)};
        case CurveKind::Star: return std::polar(r0 + eps * std::cos(lobes * th), th);
        case CurveKind::Custom: return position(th);
    }
    return {};
}

cplx CurveDescriptor::dzeta(double th) const {
    switch (kind) {
        case CurveKind::Circle: return cplx(0.0, 1.0) * std::polar(radius, th);
        case CurveKind::Ellipse: return {-a * std::sin(th), b * std::cos(th)};
        case CurveKind::Star: {
            const double r = r0 + eps * std::cos(lobes * th);
            const double dr = -eps * lobes * std::sin(lobes * th);
            return std::polar(1.0, th) * cplx(dr, r);
        }
        case CurveKind::Custom: return derivative(th);
    }
    return {};
}

void CurveDescriptor::validate() const {
    switch (kind) {
        case CurveKind::Circle:
            if (!(radius > 0.0)) throw Error(ErrorCode::InvalidCurve, "circle radius must be positive");
            break;
        case CurveKind::Ellipse:
            if (!(a > 0.0 && b > 0.0)) throw Error(ErrorCode::InvalidCurve, "ellipse semi-axes must be positive");
            break;
        case CurveKind::Star:
            if (!(r0 > 0.0) || lobes < 1) throw Error(ErrorCode::InvalidCurve, "star needs r0 > 0 and lobes >= 1");
            if (!(std::abs(eps) * lobes < r0)) {
                throw Error(ErrorCode::InvalidCurve, "star requires eps * m < r0");
            }
            break;
        case CurveKind::Custom:
            if (!position || !derivative) throw Error(ErrorCode::InvalidCurve, "custom curve lacks position/derivative");
            if (!(period > 0.0)) throw Error(ErrorCode::InvalidCurve, "custom curve period must be positive");
            break;
    }
}

ArcLengthMap::ArcLengthMap(const CurveDescriptor& desc, int resolution) : desc_(desc) {
    desc_.validate();
    if (desc_.kind != CurveKind::Custom) {
        desc_.period = kTwoPi;
    }
    const double period = desc_.period;
    omega_ = kTwoPi / period;

    // Orientation and injectivity on a fine polygon.
    const int mpoly = 2048;
    std::vector<cplx> poly(mpoly);
    double area2 = 0.0, min_speed = 1e300;
    for (int k = 0; k < mpoly; ++k) {
        const double th = period * k / mpoly;
        poly[k] = desc_.zeta(th);
        const cplx d = desc_.dzeta(th);
        min_speed = std::min(min_speed, std::abs(d));
        area2 += (std::conj(poly[k]) * d).imag();
    }
    if (min_speed < 1e-8) {
        throw Error(ErrorCode::DegenerateSpeed, "|zeta'| below 1e-8 on the sample grid");
    }
    reversed_ = area2 < 0.0;
    if (reversed_) {
        const CurveDescriptor orig = desc_;
        const double p = period;
        desc_ = CurveDescriptor::custom([orig, p](double th) { return orig.zeta(p - th); },
                                        [orig, p](double th) { return -orig.dzeta(p - th); }, p, orig.label);
    }
    for (int i = 0; i < mpoly; ++i) {
        const cplx p1 = poly[i], p2 = poly[(i + 1) % mpoly];
        for (int j = i + 2; j < mpoly; ++j) {
            if (i == 0 && j == mpoly - 1) {
                continue;
            }
            if (segments_cross(p1, p2, poly[j], poly[(j + 1) % mpoly])) {
                throw Error(ErrorCode::NonInjectiveCurve, "parametrization self-intersects");
            }
        }
    }

    // Fourier series of the speed, refined until the tail is negligible.
    int m = std::max(64, resolution);
    int mpow = 64;
    while (mpow < m) mpow *= 2;
    m = mpow;
    Eigen::FFT<double> fft;
    std::vector<std::complex<double>> spec;
    while (true) {
        std::vector<double> sp(m);
        for (int k = 0; k < m; ++k) {
            sp[k] = std::abs(desc_.dzeta(period * k / m));
        }
        fft.fwd(spec, sp);
        double tail = 0.0, head = std::abs(spec[0]);
        for (int k = m / 4; k <= m / 2; ++k) {
            tail = std::max(tail, std::abs(spec[k]));
        }
        if (tail < 1e-15 * head || m >= (1 << 18)) {
            break;
        }
        m *= 2;
    }
    c0_ = spec[0].real() / m;
    int kmax = m / 2 - 1;
    while (kmax > 0 && std::abs(spec[kmax]) < 2e-16 * std::abs(spec[0])) {
        --kmax;
    }
    ca_.assign(kmax + 1, 0.0);
    cb_.assign(kmax + 1, 0.0);
    for (int k = 1; k <= kmax; ++k) {
        ca_[k] = 2.0 * spec[k].real() / m;
        cb_[k] = -2.0 * spec[k].imag() / m;
    }
    length_ = c0_ * period;
    if (desc_.kind != CurveKind::Circle) {
        build_inverse_table();
    }

    // Chord-arc sanity check (touching near-misses the polygon test cannot see).
    {
        const int ms = 512;
        std::vector<cplx> pts(ms);
        std::vector<double> ss(ms);
        for (int k = 0; k < ms; ++k) {
            const double th = period * k / ms;
            pts[k] = desc_.zeta(th);
            ss[k] = s_of(th);
        }
        for (int i = 0; i < ms; ++i) {
            for (int j = i + 1; j < ms; ++j) {
                double d = std::abs(ss[j] - ss[i]);
                d = std::min(d, length_ - d);
                if (std::abs(pts[j] - pts[i]) < 1e-6 * d) {
                    throw Error(ErrorCode::NonInjectiveCurve, "chord-to-arc ratio below 1e-6");
                }
            }
        }
    }

    speed_defect_ = 0.0;
    for (int k = 0; k < 256; ++k) {
        const double th = period * (k + 0.37) / 256;
        speed_defect_ = std::max(speed_defect_, std::abs(std::abs(desc_.dzeta(th)) / speed_series(th) - 1.0));
    }
}

double ArcLengthMap::speed_series(double th) const {
    double v = c0_;
    const cplx e1 = std::polar(1.0, omega_ * th);
    cplx e = e1;
    for (std::size_t k = 1; k < ca_.size(); ++k) {
        v += ca_[k] * e.real() + cb_[k] * e.imag();
        e *= e1;
    }
    return v;
}

double ArcLengthMap::s_of(double th) const {
    double v = c0_ * th;
    const cplx e1 = std::polar(1.0, omega_ * th);
    cplx e = e1;
    for (std::size_t k = 1; k < ca_.size(); ++k) {
        const double mw = k * omega_;
        v += (ca_[k] * e.imag() + cb_[k] * (1.0 - e.real())) / mw;
        e *= e1;
    }
    return v;
}

double ArcLengthMap::speed_series_derivative(double th) const {
    double v = 0.0;
    const cplx e1 = std::polar(1.0, omega_ * th);
    cplx e = e1;
    for (std::size_t k = 1; k < ca_.size(); ++k) {
        v += k * omega_ * (cb_[k] * e.real() - ca_[k] * e.imag());
        e *= e1;
    }
    return v;
}

double ArcLengthMap::theta_newton(double s) const {
    double th = s / c0_;
    for (int it = 0; it < 60; ++it) {
        const double step = (s_of(th) - s) / speed_series(th);
        th -= step;
        if (std::abs(step) < 1e-15 * desc_.period) {
            break;
        }
    }
    return th;
}

void ArcLengthMap::build_inverse_table() {
    int k = 1024;
    while (k < 16 * static_cast<int>(ca_.size())) k *= 2;
    while (true) {
        tab_ds_ = length_ / k;
        tab_th_.assign(k + 1, 0.0);
        tab_d1_.assign(k + 1, 0.0);
        tab_d2_.assign(k + 1, 0.0);
        for (int j = 0; j <= k; ++j) {
            const double th = j == k ? desc_.period : theta_newton(j * tab_ds_);
            const double v = speed_series(th);
            tab_th_[j] = th;
            tab_d1_[j] = 1.0 / v;
            tab_d2_[j] = -speed_series_derivative(th) / (v * v * v);
        }
        double err = 0.0;
        const int stride = std::max(1, k / 256);
        for (int j = 0; j < k; j += stride) {
            const double s = (j + 0.5) * tab_ds_;
            err = std::max(err, std::abs(theta_of(s) - theta_newton(s)));
        }
        if (err < 1e-14 * desc_.period || k >= (1 << 20)) {
            break;
        }
        k *= 2;
    }
}

double ArcLengthMap::theta_of(double s) const {
    const double sw = wrap(s, length_);
    if (desc_.kind == CurveKind::Circle) {
        return sw / desc_.radius;
    }
    const int k = static_cast<int>(tab_th_.size()) - 1;
    int j = static_cast<int>(sw / tab_ds_);
    j = std::clamp(j, 0, k - 1);
    const double t = sw / tab_ds_ - j;
    const double t2 = t * t, t3 = t2 * t, t4 = t3 * t, t5 = t4 * t;
    const double h0 = 1 - 10 * t3 + 15 * t4 - 6 * t5;
    const double h1 = t - 6 * t3 + 8 * t4 - 3 * t5;
    const double h2 = 0.5 * t2 - 1.5 * t3 + 1.5 * t4 - 0.5 * t5;
    const double h3 = 0.5 * t3 - t4 + 0.5 * t5;
    const double h4 = -4 * t3 + 7 * t4 - 3 * t5;
    const double h5 = 10 * t3 - 15 * t4 + 6 * t5;
    const double d = tab_ds_;
    return tab_th_[j] * h0 + d * tab_d1_[j] * h1 + d * d * tab_d2_[j] * h2 + d * d * tab_d2_[j + 1] * h3 +
           d * tab_d1_[j + 1] * h4 + tab_th_[j + 1] * h5;
}

cplx ArcLengthMap::point(double s) const {
    if (desc_.kind == CurveKind::Circle) {
        return std::polar(desc_.radius, wrap(s, length_) / desc_.radius);
    }
    return desc_.zeta(theta_of(s));
}

cplx ArcLengthMap::unit_tangent(double s) const {
    if (desc_.kind == CurveKind::Circle) {
        return cplx(0.0, 1.0) * std::polar(1.0, wrap(s, length_) / desc_.radius);
    }
    const cplx d = desc_.dzeta(theta_of(s));
    return d / std::abs(d);
}

cplx ArcLengthMap::chord(double s, double u) const {
    if (desc_.kind == CurveKind::Circle) {
        const double r = desc_.radius;
        const double th = wrap(s, length_) / r;
        return r * std::polar(1.0, th + 0.5 * u / r) * cplx(0.0, 2.0 * std::sin(0.5 * u / r));
    }
    if (std::abs(u) > 0.02 * length_) {
        return point(s + u) - point(s);
    }
    if (u == 0.0) {
        return {0.0, 0.0};
    }
    // theta increment as the integral of 1 / |zeta'| in s, then the chord in theta
    const GaussRule& g = gauss_legendre(20);
    const double th = theta_of(s);
    double dth = 0.0;
    for (std::size_t q = 0; q < g.x.size(); ++q) {
        dth += g.w[q] / std::abs(desc_.dzeta(theta_of(s + 0.5 * u * (1.0 + g.x[q]))));
    }
    dth *= 0.5 * u;
    cplx v(0.0, 0.0);
    for (std::size_t q = 0; q < g.x.size(); ++q) {
        v += g.w[q] * desc_.dzeta(th + 0.5 * dth * (1.0 + g.x[q]));
    }
    return 0.5 * dth * v;
}

std::shared_ptr<const ArcLengthMap> reparametrize_arclength(const CurveDescriptor& desc, int resolution) {
    return std::make_shared<const ArcLengthMap>(desc, resolution);
}

DiscretizedCurve rediscretize(const DiscretizedCurve& curve, int n) {
    if (n < 16 || n % 2 != 0) {
        throw Error(ErrorCode::InvalidArgument, "N must be even and at least 16");
    }
    DiscretizedCurve c;
    c.map = curve.map;
    c.n = n;
    c.length = c.map->length();
    c.h = c.length / n;
    c.params.resize(n);
    c.weights = Eigen::VectorXd::Constant(n, c.h);
    c.nodes.resize(n);
    c.normals.resize(n);
    c.tangents.resize(n);
    for (int j = 0; j < n; ++j) {
        const double s = j * c.h;
        c.params(j) = s;
        c.nodes(j) = c.map->point(s);
        c.tangents(j) = c.map->unit_tangent(s);
        c.normals(j) = cplx(0.0, -1.0) * c.tangents(j);
    }
    c.bilip_constant = estimate_bilip_constant(c);
    c.cache = detail::make_quadrature_cache();
    return c;
}

DiscretizedCurve discretize(const CurveDescriptor& desc, int n) {
    if (n < 16 || n % 2 != 0) {
        throw Error(ErrorCode::InvalidArgument, "N must be even and at least 16");
    }
    DiscretizedCurve seed;
    seed.map = reparametrize_arclength(desc, 256);
    return rediscretize(seed, n);
}

double estimate_bilip_constant(const DiscretizedCurve& curve) {
    const int m = curve.n * static_cast<int>(std::ceil(512.0 / curve.n));
    const double L = curve.length;
    std::vector<cplx> pts(m);
    for (int k = 0; k < m; ++k) {
        pts[k] = curve.map->point(L * k / m);
    }
    double best = 1.0;
    for (int i = 0; i < m; ++i) {
        for (int d = 1; d <= m / 2; ++d) {
            const double arc = L * d / m;
            best = std::min(best, std::abs(pts[(i + d) % m] - pts[i]) / arc);
        }
    }
    return best;
}

}  // namespace nlbem
