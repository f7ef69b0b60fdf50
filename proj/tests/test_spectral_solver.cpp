#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"
#include "nlbem/errors.hpp"
#include "nlbem/spectral_solver.hpp"
#include <boost/math/special_functions/bessel.hpp>
#include <boost/math/tools/roots.hpp>
#include <cmath>
#include <functional>
#include <optional>
#include <random>

using namespace nlbem;

namespace {

std::optional<ErrorCode> code_of(const std::function<void()>& f) {
    try {
        f();
    } catch (const Error& e) {
        return e.code();
    }
    return std::nullopt;
}

Eigen::MatrixXcd gaussian(const Grid2D& g, cplx x0, double sigma) {
    Eigen::MatrixXcd f(g.n, g.n);
    for (int a = 0; a < g.n; ++a)
        for (int b = 0; b < g.n; ++b) f(a, b) = std::exp(-std::norm(g.point(a, b) - x0) / (2 * sigma * sigma));
    return f;
}

// Bound state of the delta shell of strength eta on the circle of radius R:
// 1 + eta R I0(kappa R) K0(kappa R) = 0.
double shell_root(double eta, double radius) {
    using boost::math::cyl_bessel_i;
    using boost::math::cyl_bessel_k;
    const auto f = [&](double k) { return 1.0 + eta * radius * cyl_bessel_i(0, k * radius) * cyl_bessel_k(0, k * radius); };
    double lo = 1e-3, hi = 1e-3;
    while (f(hi) < 0.0) hi *= 2.0;
    const auto r = boost::math::tools::bisect(f, lo, hi, [](double a, double b) { return std::abs(a - b) < 1e-15; });
    const double k = 0.5 * (r.first + r.second);
    return -k * k;
}

}  // namespace

TEST_CASE("no interaction: identity Birman-Schwinger matrix") {
    const auto c = discretize(CurveDescriptor::circle(1.0), 64);
    for (double w : {-0.01, -1.0, -100.0}) CHECK(bs_indicator(c, Elementary{}, w).indicator == doctest::Approx(1.0));
    ScanOptions o;
    o.points = 64;
    CHECK(find_eigenvalues(c, Elementary{}, o).eigenvalues.empty());
}

TEST_CASE("rank and square-root paths share the Birman-Schwinger spectrum") {
    // The two k x k matrices differ but B2 M B1 has the same nonzero eigenvalues in
    // both, so the indicator vanishes at the same w.
    const auto c = discretize(CurveDescriptor::ellipse(1.4, 1.0), 64);
    const Elementary e{2.0, cplx(0.5, 0.3), 1.0};
    const BirmanSchwinger rank(c, e, FactorMode::Rank), root(c, e, FactorMode::Sqrt);
    auto nonzero = [](const Eigen::MatrixXcd& k) {
        const Eigen::MatrixXcd a = k - Eigen::MatrixXcd::Identity(k.rows(), k.cols());
        const Eigen::VectorXcd ev = Eigen::ComplexEigenSolver<Eigen::MatrixXcd>(a, false).eigenvalues();
        std::vector<cplx> out;
        const double top = ev.cwiseAbs().maxCoeff();
        for (const cplx v : ev)
            if (std::abs(v) > 1e-9 * top) out.push_back(v);
        std::sort(out.begin(), out.end(), [](cplx x, cplx y) { return x.real() < y.real(); });
        return out;
    };
    for (double w : {-0.3, -2.0, -15.0}) {
        const auto a = nonzero(rank.system(rank.weyl(w)));
        const auto b = nonzero(root.system(root.weyl(w)));
        REQUIRE(a.size() == b.size());
        for (size_t i = 0; i < a.size(); ++i) CHECK(std::abs(a[i] - b[i]) <= 1e-8 * std::max(1.0, std::abs(a[i])));
    }
    ScanOptions o;
    o.compute_residuals = false;
    o.w_min = -1e4;
    const auto r1 = find_eigenvalues(c, e, o);
    o.mode = FactorMode::Sqrt;
    const auto r2 = find_eigenvalues(c, e, o);
    REQUIRE(r1.eigenvalues.size() == r2.eigenvalues.size());
    for (size_t i = 0; i < r1.eigenvalues.size(); ++i) {
        CHECK(std::abs(r1.eigenvalues[i].w_star - r2.eigenvalues[i].w_star) <= 1e-8 * std::abs(r1.eigenvalues[i].w_star));
    }
    MESSAGE("eigenvalues found: " << r1.eigenvalues.size());
}

TEST_CASE("mu_k tends to b_k / 8 deep in the negative axis") {
    const auto c = discretize(CurveDescriptor::circle(1.0), 128);
    const ConditionS s = condition_s_family(DecayLaw::Geometric, 0.5, 6, c);
    const BSSample b = bs_indicator(c, s, -1e6, FactorMode::Sqrt, 2);
    REQUIRE(b.mu_values.size() == 2);
    CHECK(std::abs(b.mu_values[0] - 0.5 / 8) <= 0.1 * 0.5 / 8);
    CHECK(std::abs(b.mu_values[1] - 0.25 / 8) <= 0.1 * 0.25 / 8);
}

TEST_CASE("delta shell on the circle: eigenvalue and eigenfunction") {
    const auto c = discretize(CurveDescriptor::circle(1.0), 128);
    const double oracle = shell_root(-2.0, 1.0);
    ScanOptions o;
    const EigenSearch r = find_eigenvalues(c, DeltaShellCompact{-2.0, 16}, o);
    REQUIRE(r.eigenvalues.size() == 1);
    const EigenResult& e = r.eigenvalues.front();
    CHECK(std::abs(e.w_star - oracle) <= 1e-8 * std::abs(oracle));
    CHECK(e.multiplicity == 1);
    CHECK(e.residual_bs <= 1e-8);
    CHECK(e.residual_pde <= 1e-4);
    CHECK(e.residual_tc <= 1e-3);
    // rotationally symmetric density
    const Eigen::VectorXcd phi1 = e.phi.head(c.n);
    CHECK((phi1.array() - phi1.mean()).abs().maxCoeff() <= 1e-8 * std::abs(phi1.mean()));
    CHECK(count_eigenvalues(c, DeltaShellCompact{-2.0, 16}, -50.0, -1e-4) == 1);
}

TEST_CASE("scaling covariance of the delta shell") {
    // x -> 2x maps the shell of strength eta on R = 1 to eta / 2 on R = 2 and w to w / 4
    const auto c1 = discretize(CurveDescriptor::circle(1.0), 128);
    const auto c2 = discretize(CurveDescriptor::circle(2.0), 128);
    ScanOptions o;
    o.compute_residuals = false;
    const auto a = find_eigenvalues(c1, DeltaShellCompact{-2.0, 16}, o);
    const auto b = find_eigenvalues(c2, DeltaShellCompact{-1.0, 16}, o);
    REQUIRE(a.eigenvalues.size() == 1);
    REQUIRE(b.eigenvalues.size() == 1);
    CHECK(std::abs(b.eigenvalues[0].w_star - a.eigenvalues[0].w_star / 4) <= 1e-6 * std::abs(b.eigenvalues[0].w_star));
    CHECK(std::abs(b.eigenvalues[0].w_star - shell_root(-1.0, 2.0)) <= 1e-8 * std::abs(b.eigenvalues[0].w_star));
}

TEST_CASE("elementary interactions have at most two eigenvalues") {
    const auto c = discretize(CurveDescriptor::ellipse(1.5, 1.0), 64);
    std::mt19937 rng(3);
    std::uniform_real_distribution<double> u(-5.0, 5.0);
    ScanOptions o;
    o.w_min = -1e4;
    o.compute_residuals = false;
    for (int t = 0; t < 4; ++t) {
        const Elementary e{u(rng), cplx(u(rng), u(rng)), u(rng)};
        const EigenSearch r = find_eigenvalues(c, e, o);
        int total = 0;
        for (const auto& ev : r.eigenvalues) total += ev.multiplicity;
        CHECK(total <= 2);
        CHECK(total == count_eigenvalues(c, e, o.w_min, o.w_max));
    }
}

TEST_CASE("condition (S) eigenvalue count grows with the scan depth") {
    const auto c = discretize(CurveDescriptor::circle(1.0), 128);
    const ConditionS s = condition_s_family(DecayLaw::Geometric, 0.5, 6, c);
    int prev = 0;
    for (double depth : {1e2, 1e3, 1e4, 1e5, 1e6}) {
        const int n = count_eigenvalues(c, s, -depth, -1e-4);
        CHECK(n >= prev);
        prev = n;
    }
    CHECK(prev >= 5);
}

TEST_CASE("Krein resolvent against the radial delta-shell solution") {
    using boost::math::cyl_bessel_i;
    using boost::math::cyl_bessel_k;
    const auto c = discretize(CurveDescriptor::circle(1.0), 128);
    const double eta = -2.0, sigma = 0.3, w = -9.0, k = 3.0;
    const Grid2D g = Grid2D::centered(4.0, 96);
    const KreinResult r = krein_apply(c, DeltaShellCompact{eta, 16}, w, g, gaussian(g, 0.0, sigma));
    // u = u0 - coef SL(1), with coef fixed by the shell condition at r = 1
    const double u01 = gaussian_resolvent_reference(w, sigma, 1.0).u.real();
    const double coef = eta * u01 / (1.0 + eta * cyl_bessel_i(0, k) * cyl_bessel_k(0, k));
    double err = 0.0, peak = 0.0;
    for (int a = 0; a < g.n; a += 2) {
        for (int b = 0; b < g.n; b += 2) {
            if (!r.valid(a, b)) continue;
            const double rr = std::abs(g.point(a, b));
            const double sl = rr < 1 ? cyl_bessel_i(0, k * rr) * cyl_bessel_k(0, k) : cyl_bessel_i(0, k) * cyl_bessel_k(0, k * rr);
            const double exact = gaussian_resolvent_reference(w, sigma, rr).u.real() - coef * sl;
            err = std::max(err, std::abs(r.u(a, b) - exact));
            peak = std::max(peak, std::abs(exact));
        }
    }
    CHECK(err <= 1e-8 * peak);
}

TEST_CASE("no interaction: Krein resolvent is the free resolvent") {
    const auto c = discretize(CurveDescriptor::star(1.0, 0.2, 3), 64);
    const Grid2D g = Grid2D::centered(3.0, 64);
    const cplx x0(0.2, 0.1);
    const KreinResult r = krein_apply(c, Elementary{}, cplx(-1, 1), g, gaussian(g, x0, 0.3));
    double err = 0.0, peak = 0.0;
    for (int a = 0; a < g.n; a += 3) {
        for (int b = 0; b < g.n; b += 3) {
            if (!r.valid(a, b)) continue;
            const cplx ref = gaussian_resolvent_reference(cplx(-1, 1), 0.3, std::abs(g.point(a, b) - x0)).u;
            err = std::max(err, std::abs(r.u(a, b) - ref));
            peak = std::max(peak, std::abs(ref));
        }
    }
    CHECK(err <= 1e-4 * peak);
}

TEST_CASE("first resolvent identity and self-adjointness") {
    const auto c = discretize(CurveDescriptor::circle(1.0), 128);
    const Elementary e{1.0, cplx(0.5, 0.3), -0.8};
    const Grid2D g = Grid2D::centered(4.0, 96);
    const Eigen::MatrixXcd f = gaussian(g, cplx(0.4, 0.2), 0.3);
    const double w1 = -4.0, w2 = -9.0;
    KreinOptions relaxed;
    relaxed.relaxed_resolution = true;
    const KreinResolvent r1(c, e, w1, g, relaxed);
    const KreinResult a = r1.apply(f);
    const KreinResult b = krein_apply(c, e, w2, g, f);
    const KreinResult ab = r1.apply(b);
    double err = 0.0, peak = 0.0;
    for (int i = 0; i < g.n; ++i) {
        for (int j = 0; j < g.n; ++j) {
            if (!ab.valid(i, j)) continue;
            const cplx lhs = a.u(i, j) - b.u(i, j);
            err = std::max(err, std::abs(lhs - (w1 - w2) * ab.u(i, j)));
            peak = std::max(peak, std::abs(lhs));
        }
    }
    CHECK(err <= 1e-3 * peak);

    const Eigen::MatrixXcd h = gaussian(g, cplx(-0.5, 0.6), 0.35);
    const KreinResult rh = r1.apply(h);
    const cplx lhs = krein_inner_product(c, a, g, h);
    const cplx rhs = std::conj(krein_inner_product(c, rh, g, f));
    CHECK(std::abs(lhs - rhs) <= 1e-6 * std::abs(lhs));
}

TEST_CASE("resolvent near an eigenvalue is refused") {
    const auto c = discretize(CurveDescriptor::circle(1.0), 64);
    ScanOptions o;
    o.compute_residuals = false;
    const double w = find_eigenvalues(c, DeltaShellCompact{-2.0, 16}, o).eigenvalues.at(0).w_star;
    const Grid2D g = Grid2D::centered(4.0, 32);
    CHECK(code_of([&] { KreinResolvent(c, DeltaShellCompact{-2.0, 16}, w, g); }) == ErrorCode::NearSpectrum);
}

TEST_CASE("scan options are validated") {
    const auto c = discretize(CurveDescriptor::circle(1.0), 32);
    ScanOptions o;
    o.points = 16;
    CHECK(code_of([&] { find_eigenvalues(c, Elementary{}, o); }) == ErrorCode::InvalidArgument);
    o.points = 64;
    o.w_max = 1.0;
    CHECK(code_of([&] { find_eigenvalues(c, Elementary{}, o); }) == ErrorCode::InvalidArgument);
}

TEST_CASE("large-|w| behaviour of S and W") {
    const auto c = discretize(CurveDescriptor::circle(1.0), 128);
    const std::vector<double> ws{-1e2, -1e3, -1e4, -1e5};
    std::vector<Eigen::VectorXcd> dens{Eigen::VectorXcd::Ones(c.n)};
    const Eigen::VectorXcd k0 = Eigen::VectorXcd::Ones(c.n) / std::sqrt(static_cast<double>(c.n));
    const Eigen::MatrixXcd proj = k0 * k0.adjoint();
    const auto rows = asymptotic_study_S(c, dens, proj, ws);
    for (size_t i = 1; i < rows.size(); ++i) {
        CHECK(rows[i].density_errors[0] < rows[i - 1].density_errors[0]);
        CHECK(rows[i].scaled_norm < 1.0);
    }
    CHECK(rows.back().compact_error < rows[1].compact_error);

    const auto quarter = asymptotic_study_W(c, 0.25, ws);
    const auto one = asymptotic_study_W(c, 1.0, ws);
    std::vector<double> x, y;
    for (size_t i = 0; i < ws.size(); ++i) {
        if (i > 0) CHECK(quarter[i].scaled < quarter[i - 1].scaled);
        x.push_back(-ws[i]);
        y.push_back(quarter[i].norm_W);
    }
    CHECK(one.back().scaled / one.front().scaled < quarter.back().scaled / quarter.front().scaled);
    CHECK(loglog_fit(x, y).slope <= 0.3);
}

TEST_CASE("log-log fit and spacing helpers") {
    const std::vector<double> x = log_spaced(1.0, 1e4, 5);
    CHECK(x[2] == doctest::Approx(100.0));
    std::vector<double> y;
    for (double v : x) y.push_back(3.0 * std::pow(v, -1.5));
    const LogFit f = loglog_fit(x, y);
    CHECK(f.slope == doctest::Approx(-1.5));
    CHECK(f.r2 == doctest::Approx(1.0));
    CHECK(code_of([] { loglog_fit({1.0}, {1.0}); }) == ErrorCode::InvalidArgument);
}

TEST_CASE("default scan floor covers the condition (S) asymptotes") {
    const auto c = discretize(CurveDescriptor::circle(1.0), 64);
    const ConditionS s = condition_s_family(DecayLaw::Geometric, 0.5, 6, c);
    const double floor = default_scan_floor(c, s);
    CHECK(floor <= condition_s_targets(s).back());
    CHECK(default_scan_floor(c, Elementary{}) == doctest::Approx(-50.0));
}
