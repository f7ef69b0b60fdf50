#include "nlbem/layer_operators.hpp"

#include "nlbem/errors.hpp"

#include <boost/math/quadrature/tanh_sinh.hpp>
#include <unsupported/Eigen/FFT>

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>
#include <numbers>

namespace nlbem {

namespace detail {

// Product-integration rule for one row: offsets u_q (symmetric about 0) with
// weights, the chords zeta(t_i + u_q) - x_i for every node i, and the table
// T(q, m) = l_0(u_q + m h) of trigonometric cardinal values.
struct RowGeometry {
    int n = 0;
    int q = 0;
    std::vector<double> u, wq;
    Eigen::MatrixXcd d;
    Eigen::MatrixXd r;
    Eigen::MatrixXd T;
};

struct FineGeometry {
    Eigen::VectorXcd pts;
    Eigen::VectorXd s;
};

struct QuadratureCache {
    std::mutex mu;
    std::map<std::pair<int, int>, std::shared_ptr<const RowGeometry>> rows;
    std::map<int, std::shared_ptr<const FineGeometry>> fine;
};

std::shared_ptr<QuadratureCache> make_quadrature_cache() { return std::make_shared<QuadratureCache>(); }

}  // namespace detail

namespace {

constexpr double kPi = std::numbers::pi;
const cplx kI(0.0, 1.0);

// Graded panels [p 3^{-k-1}, p 3^{-k}] reach p * 3^{-33} ~ 2e-16 p.
constexpr int kGradedPanels = 33;
// Kernel decay e^{-40} is treated as zero when truncating the row rule.
constexpr double kDecayCut = 40.0;

struct RuleKey {
    int level;
    int uniform;  // -1: panels cover the whole half period
};

RuleKey choose_rule(const DiscretizedCurve& c, cplx kappa) {
    double p = 2.0 * c.h;
    int level = 0;
    const double ak = std::abs(kappa);
    while (p * ak > 4.0 && level < 40) {
        p *= 0.5;
        ++level;
    }
    const double half = 0.5 * c.length;
    const double rek = kappa.real();
    const double cz = std::max(c.bilip_constant, 1e-3);
    const double need = rek > 0.0 ? kDecayCut / (rek * cz) : 1e300;
    if (need >= half - p) {
        return {level, -1};
    }
    int nu = 1;
    while (p + nu * p < need) {
        nu *= 2;
    }
    if (p + nu * p >= half) {
        return {level, -1};
    }
    return {level, nu};
}

std::shared_ptr<const detail::RowGeometry> row_geometry(const DiscretizedCurve& c, RuleKey key) {
    std::lock_guard<std::mutex> lock(c.cache->mu);
    const auto k = std::make_pair(key.level, key.uniform);
    auto it = c.cache->rows.find(k);
    if (it != c.cache->rows.end()) {
        return it->second;
    }
    auto g = std::make_shared<detail::RowGeometry>();
    const double p = 2.0 * c.h / std::ldexp(1.0, key.level);
    const double half = 0.5 * c.length;
    std::vector<double> up, wp;
    auto add_panel = [&](double a, double b, const GaussRule& rule) {
        for (std::size_t j = 0; j < rule.x.size(); ++j) {
            up.push_back(0.5 * (a + b) + 0.5 * (b - a) * rule.x[j]);
            wp.push_back(0.5 * (b - a) * rule.w[j]);
        }
    };
    const GaussRule& g10 = gauss_legendre(10);
    const GaussRule& g15 = gauss_legendre(15);
    double hi = p;
    for (int k = 0; k < kGradedPanels; ++k) {
        add_panel(hi / 3.0, hi, g10);
        hi /= 3.0;
    }
    add_panel(0.0, hi, g10);
    if (key.uniform < 0) {
        const int nun = static_cast<int>(std::ceil((half - p) / p - 1e-9));
        const double width = (half - p) / nun;
        for (int k = 0; k < nun; ++k) {
            add_panel(p + k * width, p + (k + 1) * width, g15);
        }
    } else {
        for (int k = 0; k < key.uniform; ++k) {
            add_panel(p + k * p, p + (k + 1) * p, g15);
        }
    }
    for (std::size_t j = 0, m = up.size(); j < m; ++j) {
        g->u.push_back(up[j]);
        g->wq.push_back(wp[j]);
        g->u.push_back(-up[j]);
        g->wq.push_back(wp[j]);
    }
    const int n = c.n, q = static_cast<int>(g->u.size());
    g->n = n;
    g->q = q;
    g->d.resize(n, q);
    g->r.resize(n, q);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < q; ++j) {
            const cplx d = c.chord(c.params(i), g->u[j]);
            g->d(i, j) = d;
            g->r(i, j) = std::abs(d);
        }
    }
    g->T.resize(q, n);
    for (int j = 0; j < q; ++j) {
        for (int m = 0; m < n; ++m) {
            g->T(j, m) = trig_cardinal(n, c.length, g->u[j] + m * c.h);
        }
    }
    c.cache->rows.emplace(k, g);
    return g;
}

std::shared_ptr<const detail::FineGeometry> fine_geometry(const DiscretizedCurve& c, int f) {
    std::lock_guard<std::mutex> lock(c.cache->mu);
    auto it = c.cache->fine.find(f);
    if (it != c.cache->fine.end()) {
        return it->second;
    }
    auto g = std::make_shared<detail::FineGeometry>();
    const int m = c.n * f;
    g->pts.resize(m);
    g->s.resize(m);
    for (int k = 0; k < m; ++k) {
        g->s(k) = c.length * k / m;
        g->pts(k) = (k % f == 0) ? c.nodes(k / f) : c.point_at(g->s(k));
    }
    c.cache->fine.emplace(f, g);
    return g;
}

// P = C T, then A(i, j) = P(i, (i - j) mod N).
Eigen::MatrixXcd product_assemble(const Eigen::MatrixXcd& C, const Eigen::MatrixXd& T, bool complex_values) {
    const int n = static_cast<int>(C.rows());
    Eigen::MatrixXd pr = C.real() * T;
    Eigen::MatrixXd pi;
    if (complex_values) {
        pi = C.imag() * T;
    }
    Eigen::MatrixXcd a(n, n);
    for (int j = 0; j < n; ++j) {
        for (int i = 0; i < n; ++i) {
            const int m = ((i - j) % n + n) % n;
            a(i, j) = complex_values ? cplx(pr(i, m), pi(i, m)) : cplx(pr(i, m), 0.0);
        }
    }
    return a;
}

struct KernelValues {
    cplx k0, k1;
};

inline KernelValues kernel_bessel(cplx t, bool need0, bool need1) {
    if (need0 && need1) {
        const BesselK01 b = bessel_k01(t);
        return {b.k0, b.k1};
    }
    if (need0) {
        return {bessel_k(0, t), cplx(0.0, 0.0)};
    }
    return {cplx(0.0, 0.0), bessel_k(1, t)};
}

// Fills kernel matrices for targets x_i + shift_i against the row rule.
void fill_kernels(const detail::RowGeometry& g, const SpectralParam& sp, const Eigen::VectorXcd* shift, unsigned mask,
                  Eigen::MatrixXcd& cs, Eigen::MatrixXcd& cw, Eigen::MatrixXcd& cwt) {
    const int n = g.n, q = g.q;
    const bool needS = mask & kLayerS, needW = mask & kLayerW, needWt = mask & kLayerWt;
    const bool need1 = needW || needWt;
    if (needS) cs.resize(n, q);
    if (needW) cw.resize(n, q);
    if (needWt) cwt.resize(n, q);
    const cplx pw = -kI * sp.sqrt_w / (4.0 * kPi);
    const double ps = 1.0 / (2.0 * kPi);
    for (int j = 0; j < q; ++j) {
        const double wq = g.wq[j];
        for (int i = 0; i < n; ++i) {
            cplx d = g.d(i, j);
            double r = g.r(i, j);
            if (shift) {
                d -= (*shift)(i);
                r = std::abs(d);
            }
            const KernelValues kv = kernel_bessel(sp.kappa * r, needS, need1);
            if (needS) cs(i, j) = wq * ps * kv.k0;
            if (need1) {
                const cplx c = wq * pw * kv.k1 / r;
                if (needW) cw(i, j) = c * std::conj(d);
                if (needWt) cwt(i, j) = c * d;
            }
        }
    }
}

}  // namespace

SpectralParam SpectralParam::make(cplx w) {
    if (w.imag() == 0.0 && w.real() >= 0.0) {
        throw Error(ErrorCode::SpectralParamOnCut, "w lies on [0, inf)");
    }
    SpectralParam sp;
    sp.w = w;
    sp.sqrt_w = sqrt_im_positive(w);
    sp.kappa = kappa_of(w);
    sp.real_negative = w.imag() == 0.0 && w.real() < 0.0;
    if (sp.real_negative) {
        sp.kappa = cplx(std::sqrt(-w.real()), 0.0);
        sp.sqrt_w = cplx(0.0, sp.kappa.real());
    }
    return sp;
}

double trig_cardinal(int n, double period, double s) {
    const double x = kPi * s / period;
    const double sx = std::sin(x);
    if (std::abs(sx) < 1e-14) {
        return 1.0;
    }
    return std::sin(n * x) * std::cos(x) / (n * sx);
}

LayerMatrices assemble_layers(const DiscretizedCurve& curve, cplx w, unsigned mask) {
    const SpectralParam sp = SpectralParam::make(w);
    const auto g = row_geometry(curve, choose_rule(curve, sp.kappa));
    Eigen::MatrixXcd cs, cw, cwt;
    fill_kernels(*g, sp, nullptr, mask, cs, cw, cwt);
    LayerMatrices out;
    if (mask & kLayerS) {
        const Eigen::MatrixXcd a = product_assemble(cs, g->T, !sp.real_negative);
        out.S = 0.5 * (a + a.transpose());
    }
    if (mask & kLayerW) {
        const Eigen::MatrixXcd a = product_assemble(cw, g->T, true);
        out.W = 0.5 * (a - a.transpose());
    }
    if (mask & kLayerWt) {
        const Eigen::MatrixXcd a = product_assemble(cwt, g->T, true);
        out.Wt = 0.5 * (a - a.transpose());
    }
    return out;
}

Eigen::MatrixXcd assemble_S(const DiscretizedCurve& curve, cplx w) { return assemble_layers(curve, w, kLayerS).S; }
Eigen::MatrixXcd assemble_W(const DiscretizedCurve& curve, cplx w) { return assemble_layers(curve, w, kLayerW).W; }
Eigen::MatrixXcd assemble_W_tilde(const DiscretizedCurve& curve, cplx w) {
    return assemble_layers(curve, w, kLayerWt).Wt;
}

Eigen::MatrixXcd weyl_matrix(const LayerMatrices& layers, cplx w) {
    const Eigen::Index n = layers.S.rows();
    Eigen::MatrixXcd m(2 * n, 2 * n);
    m.topLeftCorner(n, n) = layers.S;
    m.topRightCorner(n, n) = layers.W;
    m.bottomLeftCorner(n, n) = -layers.Wt;
    m.bottomRightCorner(n, n) = (w / 4.0) * layers.S;
    return m;
}

Eigen::MatrixXcd assemble_M(const DiscretizedCurve& curve, cplx w) {
    return weyl_matrix(assemble_layers(curve, w, kLayerAll), w);
}

Eigen::MatrixXd assemble_radial_kernel(const DiscretizedCurve& curve, cplx kappa,
                                       const std::function<double(double)>& kernel) {
    const auto g = row_geometry(curve, choose_rule(curve, kappa));
    Eigen::MatrixXd c(g->n, g->q);
    for (int j = 0; j < g->q; ++j) {
        for (int i = 0; i < g->n; ++i) {
            c(i, j) = g->wq[j] * kernel(g->r(i, j));
        }
    }
    const Eigen::MatrixXd p = c * g->T;
    const int n = g->n;
    Eigen::MatrixXd a(n, n);
    for (int j = 0; j < n; ++j) {
        for (int i = 0; i < n; ++i) {
            a(i, j) = p(i, ((i - j) % n + n) % n);
        }
    }
    return 0.5 * (a + a.transpose());
}

double distance_to_curve(const DiscretizedCurve& curve, cplx x) {
    const auto fg = fine_geometry(curve, 8);
    const Eigen::Index m = fg->pts.size();
    Eigen::Index best = 0;
    double bd = 1e300;
    for (Eigen::Index k = 0; k < m; ++k) {
        const double d = std::abs(fg->pts(k) - x);
        if (d < bd) {
            bd = d;
            best = k;
        }
    }
    // Golden-section refinement on the bracketing arc.
    const double ds = curve.length / m;
    double a = fg->s(best) - ds, b = fg->s(best) + ds;
    const double gr = 0.5 * (std::sqrt(5.0) - 1.0);
    double c1 = b - gr * (b - a), c2 = a + gr * (b - a);
    double f1 = std::abs(curve.point_at(c1) - x), f2 = std::abs(curve.point_at(c2) - x);
    for (int it = 0; it < 60; ++it) {
        if (f1 < f2) {
            b = c2;
            c2 = c1;
            f2 = f1;
            c1 = b - gr * (b - a);
            f1 = std::abs(curve.point_at(c1) - x);
        } else {
            a = c1;
            c1 = c2;
            f1 = f2;
            c2 = a + gr * (b - a);
            f2 = std::abs(curve.point_at(c2) - x);
        }
    }
    return std::min(bd, std::min(f1, f2));
}

PotentialOperators potential_operators(const DiscretizedCurve& curve, cplx w, const std::vector<cplx>& points,
                                       unsigned mask) {
    const SpectralParam sp = SpectralParam::make(w);
    const int n = curve.n;
    const int np = static_cast<int>(points.size());
    PotentialOperators out;
    const bool needS = mask & kLayerS, needW = mask & kLayerW, needWt = mask & kLayerWt;
    if (needS) out.SL.resize(np, n);
    if (needW) out.WL.resize(np, n);
    if (needWt) out.WLt.resize(np, n);
    const double L = curve.length;
    const int fcap = std::max(1, 8192 / n);
    const cplx pw = -kI * sp.sqrt_w / (4.0 * kPi);
    const double ps = 1.0 / (2.0 * kPi);
    const double ak = std::abs(sp.kappa);
    Eigen::FFT<double> fft;
    for (int p = 0; p < np; ++p) {
        const cplx x = points[p];
        const double dist = distance_to_curve(curve, x);
        if (dist < 1e-3 * L) {
            throw Error(ErrorCode::PointTooClose, "evaluation point within 1e-3 L of the curve");
        }
        int f = 1;
        while (f < fcap && (L / (n * f) > dist / 5.0 || L / (n * f) * ak > 2.0)) {
            f *= 2;
        }
        const auto fg = fine_geometry(curve, f);
        const int m = n * f;
        const double hf = L / m;
        std::vector<cplx> rs, rw, rwt;
        if (needS) rs.resize(m);
        if (needW) rw.resize(m);
        if (needWt) rwt.resize(m);
        for (int k = 0; k < m; ++k) {
            const cplx d = fg->pts(k) - x;
            const double r = std::abs(d);
            const KernelValues kv = kernel_bessel(sp.kappa * r, needS, needW || needWt);
            if (needS) rs[k] = hf * ps * kv.k0;
            if (needW || needWt) {
                const cplx c = hf * pw * kv.k1 / r;
                if (needW) rw[k] = c * std::conj(d);
                if (needWt) rwt[k] = c * d;
            }
        }
        auto project = [&](const std::vector<cplx>& row, Eigen::MatrixXcd& dst) {
            if (f == 1) {
                for (int j = 0; j < n; ++j) dst(p, j) = row[j];
                return;
            }
            std::vector<cplx> inv;
            fft.inv(inv, row);  // inv[k] = (1/m) sum_l row_l e^{+2 pi i k l / m}
            std::vector<cplx> c(n, cplx(0.0, 0.0));
            for (int k = -n / 2 + 1; k < n / 2; ++k) {
                c[(k + n) % n] = static_cast<double>(m) * inv[(k + m) % m];
            }
            c[n / 2] = 0.5 * static_cast<double>(m) * (inv[n / 2] + inv[m - n / 2]);
            std::vector<cplx> e;
            fft.fwd(e, c);
            for (int j = 0; j < n; ++j) dst(p, j) = e[j] / static_cast<double>(n);
        };
        if (needS) project(rs, out.SL);
        if (needW) project(rw, out.WL);
        if (needWt) project(rwt, out.WLt);
    }
    return out;
}

PotentialOperators offset_potential_operators(const DiscretizedCurve& curve, cplx w, double delta, unsigned mask) {
    const SpectralParam sp = SpectralParam::make(w);
    const auto g = row_geometry(curve, choose_rule(curve, sp.kappa));
    const Eigen::VectorXcd shift = delta * curve.normals;
    Eigen::MatrixXcd cs, cw, cwt;
    fill_kernels(*g, sp, &shift, mask, cs, cw, cwt);
    PotentialOperators out;
    if (mask & kLayerS) out.SL = product_assemble(cs, g->T, true);
    if (mask & kLayerW) out.WL = product_assemble(cw, g->T, true);
    if (mask & kLayerWt) out.WLt = product_assemble(cwt, g->T, true);
    return out;
}

PotentialField evaluate_gamma_field(const DiscretizedCurve& curve, cplx w, const Eigen::VectorXcd& phi1,
                                    const Eigen::VectorXcd& phi2, const std::vector<cplx>& points) {
    const PotentialOperators ops = potential_operators(curve, w, points, kLayerAll);
    PotentialField f;
    f.points = points;
    f.values = ops.SL * phi1 + ops.WL * phi2;
    f.dzbar = ops.WLt * phi1 - (w / 4.0) * (ops.SL * phi2);
    return f;
}

OneSidedTraces one_sided_traces(const DiscretizedCurve& curve, cplx w, const Eigen::VectorXcd& phi1,
                                const Eigen::VectorXcd& phi2, Side side) {
    const SpectralParam sp = SpectralParam::make(w);
    const double d0 = std::min(1e-2 * curve.length, 0.25 / std::abs(sp.kappa));
    const double sgn = side == Side::Interior ? -1.0 : 1.0;
    Eigen::VectorXcd f[3], g[3];
    auto evaluate = [&](double delta, Eigen::VectorXcd& fv, Eigen::VectorXcd& gv) {
        const PotentialOperators ops = offset_potential_operators(curve, w, sgn * delta, kLayerAll);
        const Eigen::VectorXcd s2 = ops.SL * phi2;
        fv = ops.SL * phi1 + ops.WL * phi2;
        gv = ops.WLt * phi1 - (w / 4.0) * s2;
    };
    auto richardson = [](const Eigen::VectorXcd* v, Eigen::VectorXcd& r1b) {
        const Eigen::VectorXcd r1a = 2.0 * v[1] - v[0];
        r1b = 2.0 * v[2] - v[1];
        return Eigen::VectorXcd((4.0 * r1b - r1a) / 3.0);
    };
    for (int k = 0; k < 3; ++k) {
        evaluate(d0 / std::ldexp(1.0, k), f[k], g[k]);
    }
    // On a failed check the offsets are halved (up to three times) before giving up.
    OneSidedTraces out;
    double h = d0;
    for (int attempt = 0;; ++attempt) {
        Eigen::VectorXcd fb, gb;
        out.f = richardson(f, fb);
        out.dzbar_f = richardson(g, gb);
        out.offset = h;
        const double nf = std::max(out.f.norm(), 1e-300), ng = std::max(out.dzbar_f.norm(), 1e-300);
        out.defect = std::max((out.f - fb).norm() / nf, (out.dzbar_f - gb).norm() / ng);
        if (out.defect <= 1e-3) {
            return out;
        }
        if (attempt == 3) {
            throw Error(ErrorCode::ExtrapolationDiverged, "successive trace extrapolants differ by more than 1e-3");
        }
        h *= 0.5;
        f[0] = f[1];
        f[1] = f[2];
        g[0] = g[1];
        g[1] = g[2];
        evaluate(h / 4.0, f[2], g[2]);
    }
}

double integrate_majorant(const std::function<double(double)>& alpha, double a) {
    boost::math::quadrature::tanh_sinh<double> ts;
    double err = 0.0;
    const double v = ts.integrate(alpha, 0.0, a, std::sqrt(std::numeric_limits<double>::epsilon()), &err);
    const double s0 = 1e-12 * a;
    if (!std::isfinite(v) || s0 * alpha(s0) > 1e-6 * std::abs(v) || err > 1e-6 * std::abs(v)) {
        throw Error(ErrorCode::MajorantNotIntegrable, "majorant integral does not converge at 0");
    }
    return v;
}

SchurResult schur_bound_check(const DiscretizedCurve& curve, cplx kappa_hint,
                              const std::function<double(double)>& kernel,
                              const std::function<double(double)>& alpha) {
    const Eigen::MatrixXd a = assemble_radial_kernel(curve, kappa_hint, kernel);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(a, Eigen::EigenvaluesOnly);
    SchurResult r;
    r.discrete_norm = es.eigenvalues().cwiseAbs().maxCoeff();
    r.c_zeta = curve.bilip_constant;
    r.analytic_bound = 2.0 / r.c_zeta * integrate_majorant(alpha, r.c_zeta * curve.length / 2.0);
    r.holds = r.discrete_norm <= r.analytic_bound * (1.0 + 1e-2);
    return r;
}

namespace {

// Least decreasing majorant of a radial kernel. A unimodal kernel gets the exact
// envelope (flat up to the peak, the kernel beyond); otherwise a step envelope on
// a log grid, which over-estimates slightly.
std::function<double(double)> decreasing_envelope(const std::function<double(double)>& k, double smax) {
    const int m = 4000;
    const double smin = 1e-14 * smax;
    std::vector<double> grid(m), val(m);
    for (int i = 0; i < m; ++i) {
        grid[i] = smin * std::pow(smax / smin, double(i) / (m - 1));
        val[i] = k(grid[i]);
    }
    const int im = static_cast<int>(std::max_element(val.begin(), val.end()) - val.begin());
    bool unimodal = true;
    for (int i = im + 1; i < m; ++i) {
        if (val[i] > val[i - 1] * (1.0 + 1e-12)) {
            unimodal = false;
            break;
        }
    }
    if (unimodal) {
        double a = grid[std::max(im - 1, 0)], b = grid[std::min(im + 1, m - 1)];
        const double gr = 0.5 * (std::sqrt(5.0) - 1.0);
        for (int it = 0; it < 80; ++it) {
            const double c1 = b - gr * (b - a), c2 = a + gr * (b - a);
            if (k(c1) > k(c2)) b = c2; else a = c1;
        }
        const double speak = 0.5 * (a + b);
        const double kpeak = std::max(k(speak), val[im]);
        return [k, speak, kpeak](double s) { return s <= speak ? kpeak : std::min(kpeak, k(s)); };
    }
    auto g = std::make_shared<std::vector<double>>(grid);
    auto env = std::make_shared<std::vector<double>>(m);
    double run = 0.0;
    for (int i = m - 1; i >= 0; --i) {
        run = std::max(run, val[i]);
        (*env)[i] = run;
    }
    return [g, env](double s) {
        auto it = std::upper_bound(g->begin(), g->end(), s);
        const std::size_t idx = it == g->begin() ? 0 : static_cast<std::size_t>(it - g->begin() - 1);
        return (*env)[std::min(idx, env->size() - 1)];
    };
}

}  // namespace

SchurResult schur_bound_check(const DiscretizedCurve& curve, SchurKernel kernel, cplx w) {
    const SpectralParam sp = SpectralParam::make(w);
    const cplx kap = sp.kappa;
    if (kernel == SchurKernel::K0Modulus) {
        auto k = [kap](double r) { return std::abs(bessel_k(0, kap * r)) / (2.0 * kPi); };
        const double rek = kap.real();
        auto alpha = [rek](double s) { return bessel_k(0, cplx(rek * s, 0.0)).real() / (2.0 * kPi); };
        return schur_bound_check(curve, kap, k, alpha);
    }
    const double ak = std::abs(kap);
    auto k = [kap, ak](double r) {
        const cplx t = kap * r;
        const cplx rem = std::abs(t) <= 2.0 ? bessel_k1_splitting(t).regular : bessel_k(1, t) - 1.0 / t;
        return ak / (4.0 * kPi) * std::abs(rem);
    };
    auto alpha = decreasing_envelope(k, curve.length);
    return schur_bound_check(curve, kap, k, alpha);
}

SchurResult potential_schur_check(const DiscretizedCurve& curve, cplx w, double half_width, int grid_n) {
    const SpectralParam sp = SpectralParam::make(w);
    std::vector<cplx> pts;
    const double hg = 2.0 * half_width / grid_n;
    for (int a = 0; a < grid_n; ++a) {
        for (int b = 0; b < grid_n; ++b) {
            const cplx x(-half_width + (a + 0.5) * hg, -half_width + (b + 0.5) * hg);
            if (distance_to_curve(curve, x) >= 1e-3 * curve.length) {
                pts.push_back(x);
            }
        }
    }
    const PotentialOperators ops = potential_operators(curve, w, pts, kLayerS);
    // l2 representation: sqrt(cell area) * SL * diag(sigma^{-1/2})
    const Eigen::MatrixXcd g = hg * ops.SL / std::sqrt(curve.h);
    const Eigen::MatrixXcd gram = g.adjoint() * g;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(gram, Eigen::EigenvaluesOnly);
    SchurResult r;
    r.discrete_norm = std::sqrt(std::max(0.0, es.eigenvalues().maxCoeff()));
    r.c_zeta = curve.bilip_constant;
    const double rek = sp.kappa.real();
    auto alpha = [rek](double s) { return bessel_k(0, cplx(rek * s, 0.0)).real() / (2.0 * kPi); };
    const double first = 4.0 / r.c_zeta * integrate_majorant(alpha, r.c_zeta * curve.length / 4.0);
    boost::math::quadrature::tanh_sinh<double> ts;
    const double second =
        2.0 * kPi * ts.integrate([&](double s) { return alpha(s) * s; }, 0.0, 80.0 / rek);
    r.analytic_bound = std::sqrt(first) * std::sqrt(second);
    r.holds = r.discrete_norm <= r.analytic_bound * (1.0 + 1e-2);
    return r;
}

}  // namespace nlbem
